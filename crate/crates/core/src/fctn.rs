//! Fully-connected tensor network (FCTN) factor sets.
//!
//! A network of `n` factors represents an order-`n` tensor. Every pair of
//! factors `(i, j)` shares one bond of extent `r[i][j]`. Factor `t` is an
//! order-`n` tensor whose mode `t` carries the data index and whose mode
//! `k != t` carries the bond with factor `k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Symmetric matrix of bond ranks between `n` factors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RankList", into = "RankList")]
pub struct RankMatrix {
    n: usize,
    r: Vec<usize>,
}

/// Upper-triangle listing `r(0,1), r(0,2), …, r(0,n-1), r(1,2), …`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankList(pub Vec<usize>);

impl RankMatrix {
    /// Builds the matrix from its strict upper triangle in row order.
    pub fn from_upper(n: usize, upper: &[usize]) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("a network needs at least 2 factors, got {n}")));
        }
        let expected = n * (n - 1) / 2;
        if upper.len() != expected {
            return Err(Error::invalid(format!("{n} factors need {expected} bond ranks, got {}", upper.len())));
        }
        if upper.contains(&0) {
            return Err(Error::invalid("bond ranks must be at least 1"));
        }
        let mut r = vec![0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().expect("length checked");
                r[i * n + j] = v;
                r[j * n + i] = v;
            }
        }
        Ok(RankMatrix { n, r })
    }

    /// Every bond gets the same rank.
    pub fn uniform(n: usize, rank: usize) -> Result<Self> {
        RankMatrix::from_upper(n, &vec![rank; n.saturating_sub(1) * n / 2])
    }

    pub fn factor_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.r[i * self.n + j]
    }

    pub fn upper(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// The rank matrix of the network with factors reordered so that new
    /// factor `k` is old factor `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut upper = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                upper.push(self.get(perm[i], perm[j]));
            }
        }
        RankMatrix::from_upper(self.n, &upper)
    }

    /// Shape of factor `t` when its data mode has extent `data_extent`.
    pub fn factor_shape(&self, t: usize, data_extent: usize) -> Vec<usize> {
        (0..self.n).map(|k| if k == t { data_extent } else { self.get(t, k) }).collect()
    }
}

impl TryFrom<RankList> for RankMatrix {
    type Error = Error;

    fn try_from(list: RankList) -> Result<Self> {
        // n(n-1)/2 = len
        let len = list.0.len();
        let n = (1..=64)
            .find(|n| n * (n - 1) / 2 == len)
            .ok_or_else(|| Error::invalid(format!("{len} is not a triangular bond count")))?;
        RankMatrix::from_upper(n, &list.0)
    }
}

impl From<RankMatrix> for RankList {
    fn from(r: RankMatrix) -> Self {
        RankList(r.upper())
    }
}

/// The factors of an FCTN together with their bond ranks.
#[derive(Clone, Debug, PartialEq)]
pub struct FctnFactorSet {
    factors: Vec<DenseTensor>,
    ranks: RankMatrix,
    data_extents: Vec<usize>,
}

impl FctnFactorSet {
    pub fn new(factors: Vec<DenseTensor>, ranks: RankMatrix) -> Result<Self> {
        let n = ranks.factor_count();
        if factors.len() != n {
            return Err(Error::invalid(format!("rank matrix describes {n} factors, got {}", factors.len())));
        }
        let mut data_extents = Vec::with_capacity(n);
        for (t, f) in factors.iter().enumerate() {
            if f.order() != n {
                return Err(Error::shape(format!("factor {t} has order {}, expected {n}", f.order())));
            }
            let extent = f.shape()[t];
            if f.shape() != ranks.factor_shape(t, extent).as_slice() {
                return Err(Error::shape(format!(
                    "factor {t} has shape {:?}, bonds require {:?}",
                    f.shape(),
                    ranks.factor_shape(t, extent)
                )));
            }
            data_extents.push(extent);
        }
        Ok(FctnFactorSet { factors, ranks, data_extents })
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[DenseTensor] {
        &self.factors
    }

    pub fn factor(&self, t: usize) -> &DenseTensor {
        &self.factors[t]
    }

    pub fn ranks(&self) -> &RankMatrix {
        &self.ranks
    }

    pub fn data_extents(&self) -> &[usize] {
        &self.data_extents
    }

    pub fn into_factors(self) -> Vec<DenseTensor> {
        self.factors
    }

    /// Replaces factor `t`; its data extent may change but the bonds may not.
    pub fn replace_factor(&mut self, t: usize, factor: DenseTensor) -> Result<()> {
        self.check_index(t)?;
        let extent = factor.shape().get(t).copied().unwrap_or(0);
        if factor.shape() != self.ranks.factor_shape(t, extent).as_slice() {
            return Err(Error::shape(format!(
                "replacement for factor {t} has shape {:?}, bonds require {:?}",
                factor.shape(),
                self.ranks.factor_shape(t, extent)
            )));
        }
        self.factors[t] = factor;
        self.data_extents[t] = extent;
        Ok(())
    }

    /// A copy with factor `t` swapped out.
    pub fn with_factor(&self, t: usize, factor: DenseTensor) -> Result<Self> {
        let mut out = self.clone();
        out.replace_factor(t, factor)?;
        Ok(out)
    }

    fn check_index(&self, t: usize) -> Result<()> {
        if t >= self.factors.len() {
            return Err(Error::invalid(format!("factor index {t} out of range for {} factors", self.factors.len())));
        }
        Ok(())
    }

    /// The represented tensor, of shape `data_extents`.
    pub fn contract_full(&self) -> Result<DenseTensor> {
        let n = self.factor_count();
        let parts: Vec<Labeled> = (0..n).map(|t| Labeled::factor(&self.factors[t], t)).collect();
        let net = contract_chain(parts)?;
        let order: Vec<Label> = (0..n).map(Label::Data).collect();
        net.arrange(&order)
    }

    /// Mode-`t` unfolding of factor `t`: data extent by the product of its bonds.
    pub fn factor_unfold(&self, t: usize) -> Result<Matrix> {
        self.check_index(t)?;
        self.factors[t].unfold(t)
    }

    /// Contraction of every factor except `t`, unfolded so that
    /// `contract_full()_(t) = factor_unfold(t) · composite_except(t)ᵀ`.
    ///
    /// Rows run over the data indices of the other factors, columns over the
    /// bonds of factor `t`; both in ascending factor order, column-major.
    /// `spectral_map` is multiplied into the data mode of the last factor
    /// first, which must then not be `t`.
    pub fn composite_except(&self, t: usize, spectral_map: Option<&Matrix>) -> Result<Matrix> {
        self.check_index(t)?;
        let n = self.factor_count();
        let last = n - 1;
        let mapped = match spectral_map {
            None => None,
            Some(_) if t == last => {
                return Err(Error::invalid("the spectral map applies to the last factor, which is the excluded one"))
            }
            Some(map) => {
                if map.cols() != self.data_extents[last] {
                    return Err(Error::shape(format!(
                        "map has {} columns, last factor's data extent is {}",
                        map.cols(),
                        self.data_extents[last]
                    )));
                }
                Some(self.factors[last].mode_product(map, last)?)
            }
        };
        let parts: Vec<Labeled> = (0..n)
            .filter(|&k| k != t)
            .map(|k| match &mapped {
                Some(m) if k == last => Labeled::factor(m, k),
                _ => Labeled::factor(&self.factors[k], k),
            })
            .collect();
        let net = contract_chain(parts)?;
        let order: Vec<Label> = (0..n)
            .filter(|&k| k != t)
            .map(Label::Data)
            .chain((0..n).filter(|&k| k != t).map(|k| Label::bond(t, k)))
            .collect();
        let arranged = net.arrange(&order)?;
        let rows: usize = (0..n)
            .filter(|&k| k != t)
            .map(|k| arranged.shape()[order.iter().position(|l| *l == Label::Data(k)).unwrap()])
            .product();
        let cols = arranged.len() / rows;
        Matrix::new(rows, cols, arranged.into_data())
    }
}

/// Fills a factor set with i.i.d. uniform `[0, 1)` entries.
pub fn random_init(ranks: &RankMatrix, data_extents: &[usize], seed: u64) -> Result<FctnFactorSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_init_with(ranks, data_extents, &mut rng)
}

pub(crate) fn random_init_with(
    ranks: &RankMatrix,
    data_extents: &[usize],
    rng: &mut impl Rng,
) -> Result<FctnFactorSet> {
    let n = ranks.factor_count();
    if data_extents.len() != n {
        return Err(Error::invalid(format!("{} data extents for {n} factors", data_extents.len())));
    }
    let factors =
        (0..n).map(|t| uniform_tensor(ranks.factor_shape(t, data_extents[t]), rng)).collect::<Result<Vec<_>>>()?;
    FctnFactorSet::new(factors, ranks.clone())
}

pub(crate) fn uniform_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Result<DenseTensor> {
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| rng.random::<f64>()).collect();
    DenseTensor::new(shape, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Label {
    Data(usize),
    /// Bond between factors `(i, j)` with `i < j`.
    Bond(usize, usize),
}

impl Label {
    fn bond(a: usize, b: usize) -> Self {
        Label::Bond(a.min(b), a.max(b))
    }
}

/// A tensor whose modes carry network labels.
struct Labeled {
    tensor: DenseTensor,
    labels: Vec<Label>,
}

impl Labeled {
    fn factor(f: &DenseTensor, t: usize) -> Self {
        let labels = (0..f.order()).map(|k| if k == t { Label::Data(t) } else { Label::bond(t, k) }).collect();
        Labeled { tensor: f.clone(), labels }
    }

    /// Contracts every label shared with `other`. Result modes: the free
    /// labels of `self`, then the free labels of `other`.
    fn contract(self, other: Labeled) -> Result<Labeled> {
        let shared: Vec<Label> = self.labels.iter().copied().filter(|l| other.labels.contains(l)).collect();
        let free_a: Vec<Label> = self.labels.iter().copied().filter(|l| !shared.contains(l)).collect();
        let free_b: Vec<Label> = other.labels.iter().copied().filter(|l| !shared.contains(l)).collect();

        let pos = |labels: &[Label], l: &Label| labels.iter().position(|x| x == l).unwrap();
        let perm_a: Vec<usize> = free_a.iter().chain(&shared).map(|l| pos(&self.labels, l)).collect();
        let perm_b: Vec<usize> = shared.iter().chain(&free_b).map(|l| pos(&other.labels, l)).collect();
        for l in &shared {
            let (ea, eb) = (self.tensor.shape()[pos(&self.labels, l)], other.tensor.shape()[pos(&other.labels, l)]);
            if ea != eb {
                return Err(Error::shape(format!("bond {l:?} has extents {ea} and {eb}")));
            }
        }

        let a = self.tensor.permute(&perm_a)?;
        let b = other.tensor.permute(&perm_b)?;
        let inner: usize = shared.iter().map(|l| self.tensor.shape()[pos(&self.labels, l)]).product();
        let rows = a.len() / inner;
        let cols = b.len() / inner;
        let am = Matrix::new(rows, inner, a.into_data())?;
        let bm = Matrix::new(inner, cols, b.into_data())?;
        let c = am.matmul(&bm)?;

        let shape: Vec<usize> = free_a
            .iter()
            .map(|l| self.tensor.shape()[pos(&self.labels, l)])
            .chain(free_b.iter().map(|l| other.tensor.shape()[pos(&other.labels, l)]))
            .collect();
        let labels: Vec<Label> = free_a.into_iter().chain(free_b).collect();
        if labels.is_empty() {
            // full contraction to a scalar
            return Ok(Labeled { tensor: DenseTensor::new(vec![1], c.into_data())?, labels: vec![] });
        }
        Ok(Labeled { tensor: DenseTensor::new(shape, c.into_data())?, labels })
    }

    fn arrange(self, order: &[Label]) -> Result<DenseTensor> {
        if order.len() != self.labels.len() {
            return Err(Error::shape(format!("network has free labels {:?}, requested {order:?}", self.labels)));
        }
        let perm: Vec<usize> = order
            .iter()
            .map(|l| {
                self.labels.iter().position(|x| x == l).ok_or_else(|| Error::shape(format!("label {l:?} is not free")))
            })
            .collect::<Result<_>>()?;
        self.tensor.permute(&perm)
    }
}

/// Contracts factors pairwise in the given order.
fn contract_chain(parts: Vec<Labeled>) -> Result<Labeled> {
    let mut it = parts.into_iter();
    let first = it.next().ok_or_else(|| Error::invalid("nothing to contract"))?;
    it.try_fold(first, Labeled::contract)
}
