//! Base feature maps, their concatenation, and kernels built from index sets.
//!
//! Group indices are zero-based: group `j` of the 1-D cosine family is
//! `cos((j + 1) π x)` and group `j` of the Legendre family is the Legendre
//! polynomial of degree `j + 1`. Every built-in group is scalar (`d_j = 1`),
//! but the atlas carries per-group dimensions and offsets throughout so the
//! rest of the crate never assumes it.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use crate::error::{config_error, Error, Result};

/// The built-in families of base features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureFamily {
    /// `φ_j(x) = cos(jπx)` on a 1-D interval.
    Cosine1D,
    /// Legendre polynomials `P_j` with `P_j(1) = 1` on a subset of `[-1, 1]`.
    Legendre1D,
    /// `φ_{a,b}(x) = cos(aπx₁) cos(bπx₂)` with `(a, b)` enumerated row-major
    /// over `{1..⌈√p⌉}²` and truncated to `p` groups.
    CosineTensor2D,
}

impl FeatureFamily {
    pub fn input_dim(self) -> usize {
        match self {
            FeatureFamily::Cosine1D | FeatureFamily::Legendre1D => 1,
            FeatureFamily::CosineTensor2D => 2,
        }
    }

    pub fn default_domain(self) -> Domain {
        match self {
            FeatureFamily::Cosine1D => Domain::unit(1),
            FeatureFamily::Legendre1D => Domain {
                lower: vec![-1.0],
                upper: vec![1.0],
            },
            FeatureFamily::CosineTensor2D => Domain::unit(2),
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(config_error(
                "domain bounds must be non-empty and of equal length",
            ));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return Err(config_error(
                "domain bounds must be finite with lower <= upper",
            ));
        }
        Ok(Domain { lower, upper })
    }

    /// `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Domain {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::PointDimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        for (axis, ((&v, &lo), &hi)) in x.iter().zip(&self.lower).zip(&self.upper).enumerate() {
            if !(v >= lo && v <= hi) {
                return Err(Error::OutOfDomain {
                    axis,
                    value: v,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }

    pub fn contains_box(&self, other: &Domain) -> bool {
        self.dim() == other.dim()
            && self.lower.iter().zip(&other.lower).all(|(a, b)| a <= b)
            && self.upper.iter().zip(&other.upper).all(|(a, b)| a >= b)
    }
}

/// A finite set of points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGrid {
    dim: usize,
    coords: Vec<f64>,
}

impl PointGrid {
    pub fn from_coords(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::Shape {
                expected: dim,
                found: coords.len(),
            });
        }
        Ok(PointGrid { dim, coords })
    }

    /// Regular grid with `resolution` evenly spaced points per axis, endpoints
    /// included. The first axis varies slowest.
    pub fn regular(domain: &Domain, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(config_error("grid resolution must be at least 2"));
        }
        let dim = domain.dim();
        let total = resolution.pow(dim as u32);
        let mut coords = Vec::with_capacity(total * dim);
        let mut digits = vec![0usize; dim];
        for _ in 0..total {
            for (axis, &k) in digits.iter().enumerate() {
                let (lo, hi) = (domain.lower[axis], domain.upper[axis]);
                let v = if k + 1 == resolution {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (resolution - 1) as f64
                };
                coords.push(v);
            }
            for axis in (0..dim).rev() {
                digits[axis] += 1;
                if digits[axis] < resolution {
                    break;
                }
                digits[axis] = 0;
            }
        }
        Ok(PointGrid { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }
}

/// The ordered set of base feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureAtlas {
    family: FeatureFamily,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    domain: Domain,
}

impl FeatureAtlas {
    pub fn new(family: FeatureFamily, num_groups: usize, domain: Domain) -> Result<Self> {
        if num_groups == 0 {
            return Err(config_error("an atlas needs at least one base kernel"));
        }
        if domain.dim() != family.input_dim() {
            return Err(Error::PointDimension {
                expected: family.input_dim(),
                found: domain.dim(),
            });
        }
        if family == FeatureFamily::Legendre1D && !family.default_domain().contains_box(&domain) {
            return Err(config_error(
                "Legendre features are only bounded on [-1, 1]",
            ));
        }
        let dims = vec![1; num_groups];
        let mut offsets = Vec::with_capacity(num_groups + 1);
        offsets.push(0);
        for d in &dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        Ok(FeatureAtlas {
            family,
            dims,
            offsets,
            domain,
        })
    }

    /// Atlas on the family's default domain.
    pub fn with_default_domain(family: FeatureFamily, num_groups: usize) -> Result<Self> {
        Self::new(family, num_groups, family.default_domain())
    }

    pub fn family(&self) -> FeatureFamily {
        self.family
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn num_groups(&self) -> usize {
        self.dims.len()
    }

    pub fn group_dims(&self) -> &[usize] {
        &self.dims
    }

    /// Group offsets into the concatenated feature vector; length `p + 1`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn group_range(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    fn tensor_side(&self) -> usize {
        let p = self.num_groups();
        let mut q = 1;
        while q * q < p {
            q += 1;
        }
        q
    }

    /// `φ_j(x)`.
    pub fn eval_feature(&self, j: usize, x: &[f64]) -> Result<Vec<f64>> {
        if j >= self.num_groups() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.num_groups(),
            });
        }
        self.domain.check(x)?;
        let v = match self.family {
            FeatureFamily::Cosine1D => libm::cos((j + 1) as f64 * PI * x[0]),
            FeatureFamily::Legendre1D => legendre(j + 1, x[0]),
            FeatureFamily::CosineTensor2D => {
                let q = self.tensor_side();
                let (a, b) = (j / q + 1, j % q + 1);
                libm::cos(a as f64 * PI * x[0]) * libm::cos(b as f64 * PI * x[1])
            }
        };
        Ok(vec![v])
    }

    /// `[φ_1(x); …; φ_p(x)]`.
    pub fn eval_concat(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.total_dim()];
        self.eval_concat_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_concat_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.domain.check(x)?;
        if out.len() != self.total_dim() {
            return Err(Error::Shape {
                expected: self.total_dim(),
                found: out.len(),
            });
        }
        let p = self.num_groups();
        match self.family {
            FeatureFamily::Cosine1D => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = libm::cos((j + 1) as f64 * PI * x[0]);
                }
            }
            FeatureFamily::Legendre1D => {
                let t = x[0];
                let (mut prev, mut cur) = (1.0, t);
                out[0] = cur;
                for (k, o) in out.iter_mut().enumerate().take(p).skip(1) {
                    let next = ((2 * k + 1) as f64 * t * cur - k as f64 * prev) / (k + 1) as f64;
                    prev = cur;
                    cur = next;
                    *o = cur;
                }
            }
            FeatureFamily::CosineTensor2D => {
                let q = self.tensor_side();
                let c1: Vec<f64> = (1..=q).map(|a| libm::cos(a as f64 * PI * x[0])).collect();
                let c2: Vec<f64> = (1..=q).map(|b| libm::cos(b as f64 * PI * x[1])).collect();
                for (j, o) in out.iter_mut().enumerate() {
                    *o = c1[j / q] * c2[j % q];
                }
            }
        }
        Ok(())
    }

    /// Concatenated features of every grid point.
    pub fn tabulate(&self, grid: &PointGrid) -> Result<FeatureTable> {
        let d = self.total_dim();
        let mut values = vec![0.0; grid.len() * d];
        for (i, x) in grid.iter().enumerate() {
            self.eval_concat_into(x, &mut values[i * d..(i + 1) * d])?;
        }
        Ok(FeatureTable {
            grid: grid.clone(),
            offsets: self.offsets.clone(),
            values,
        })
    }
}

/// Legendre polynomial of degree `n` by the three-term recurrence.
pub fn legendre(n: usize, t: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, t);
    for k in 1..n {
        let next = ((2 * k + 1) as f64 * t * cur - k as f64 * prev) / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// Candidate points together with their concatenated features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    grid: PointGrid,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn grid(&self) -> &PointGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Width of each row (the concatenated dimension `d`).
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Group offsets of the atlas the table was built from.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.values[i * d..(i + 1) * d]
    }
}

/// A selected index set `Ĵ` and the uniform-average kernel it induces.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KernelEstimate {
    selected: Vec<usize>,
    num_groups: usize,
}

impl KernelEstimate {
    /// Sorts and deduplicates `selected`; every index must be below `num_groups`.
    pub fn new(selected: impl IntoIterator<Item = usize>, num_groups: usize) -> Result<Self> {
        let mut selected: Vec<usize> = selected.into_iter().collect();
        selected.sort_unstable();
        selected.dedup();
        if let Some(&bad) = selected.iter().find(|&&j| j >= num_groups) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: num_groups,
            });
        }
        Ok(KernelEstimate {
            selected,
            num_groups,
        })
    }

    /// `k_full`: every base kernel with weight `1/p`.
    pub fn full(num_groups: usize) -> Self {
        KernelEstimate {
            selected: (0..num_groups).collect(),
            num_groups,
        }
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.selected.len() == self.num_groups
    }

    pub fn contains(&self, j: usize) -> bool {
        self.selected.binary_search(&j).is_ok()
    }

    /// `1/|Ĵ|`, or `None` for the empty set.
    pub fn weight(&self) -> Option<f64> {
        (!self.selected.is_empty()).then(|| 1.0 / self.selected.len() as f64)
    }

    /// Columns of the concatenated feature vector covered by `Ĵ`, given the
    /// group offsets of the atlas.
    pub fn active_columns(&self, offsets: &[usize]) -> Vec<usize> {
        self.selected
            .iter()
            .flat_map(|&j| offsets[j]..offsets[j + 1])
            .collect()
    }

    /// `(1/|Ĵ|) Σ_{j∈Ĵ} φ_j(x)ᵀφ_j(x′)`.
    pub fn kernel_eval(&self, atlas: &FeatureAtlas, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        let w = self.weight().ok_or(Error::EmptyKernel)?;
        if self.num_groups != atlas.num_groups() {
            return Err(Error::Shape {
                expected: atlas.num_groups(),
                found: self.num_groups,
            });
        }
        let a = atlas.eval_concat(x)?;
        let b = atlas.eval_concat(x_prime)?;
        let sum: f64 = self
            .selected
            .iter()
            .map(|&j| {
                let r = atlas.group_range(j);
                crate::linalg::dot(&a[r.clone()], &b[r])
            })
            .sum();
        Ok(w * sum)
    }
}
