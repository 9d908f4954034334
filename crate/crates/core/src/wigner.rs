//! Wigner function of a cavity state from displaced parity,
//! `W(β) = (2/π) Tr[ρ D(β) P D†(β)]` with `β = x + ip`.

use std::f64::consts::FRAC_2_PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilation_op, BasisDims, CMatrix, DensityOp, OpMatrix, C64};
use crate::states::coherent_tail;

/// Allowed unitarity defect of a truncated displacement.
pub const UNITARITY_TOL: f64 = 1e-8;

/// Sample axes for a Wigner grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_min: -4.0,
            x_max: 4.0,
            p_min: -4.0,
            p_max: 4.0,
            nx: 81,
            np: 81,
        }
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.np == 0 || !(self.x_max >= self.x_min) || !(self.p_max >= self.p_min) {
            return Err(Error::InvalidParameter("Wigner grid needs non-empty ordered axes".into()));
        }
        Ok(())
    }

    pub fn x_axis(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.nx)
    }

    pub fn p_axis(&self) -> Vec<f64> {
        axis(self.p_min, self.p_max, self.np)
    }
}

/// `W(x, p)` on a rectangular grid; `values[i][j]` is at `(x_axis[i], p_axis[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Phase-space convention of the axes.
    pub convention: String,
}

impl WignerGrid {
    /// Riemann sum of `W` over the grid.
    pub fn integral(&self) -> f64 {
        let dx = if self.x_axis.len() > 1 { self.x_axis[1] - self.x_axis[0] } else { 1.0 };
        let dp = if self.p_axis.len() > 1 { self.p_axis[1] - self.p_axis[0] } else { 1.0 };
        self.values.iter().flatten().sum::<f64>() * dx * dp
    }

    /// Value at the grid point nearest to `(x, p)`.
    pub fn nearest(&self, x: f64, p: f64) -> f64 {
        let near = |axis: &[f64], v: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        self.values[near(&self.x_axis, x)][near(&self.p_axis, p)]
    }

    /// Largest `|W(β) − W(−β)|`, meaningful for symmetric grids.
    pub fn inversion_asymmetry(&self) -> f64 {
        let (nx, np) = (self.x_axis.len(), self.p_axis.len());
        let mut worst: f64 = 0.0;
        for i in 0..nx {
            for j in 0..np {
                worst = worst.max((self.values[i][j] - self.values[nx - 1 - i][np - 1 - j]).abs());
            }
        }
        worst
    }

    /// `x,p,W` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,p,W")?;
        for (i, x) in self.x_axis.iter().enumerate() {
            for (j, p) in self.p_axis.iter().enumerate() {
                writeln!(out, "{:.8e},{:.8e},{:.8e}", x, p, self.values[i][j])?;
            }
        }
        Ok(())
    }
}

/// Rows `0..rows` of `D(β)` for many `β`, from one eigendecomposition of
/// `i(â† − â)` on a padded space; `D(re^{iθ}) = e^{iθn̂} e^{r(â† − â)} e^{−iθn̂}`.
struct DisplacementRows {
    rows: usize,
    vecs: CMatrix,
    vals: Vec<f64>,
}

impl DisplacementRows {
    fn new(rows: usize, max_abs_beta: f64) -> Result<Self> {
        let mut pad = 24 + (4.0 * max_abs_beta * max_abs_beta).ceil() as usize;
        loop {
            let big = rows + pad;
            let a = annihilation_op(big)?;
            let h = (a.adjoint().matrix() - a.matrix()) * C64::new(0.0, 1.0);
            let eig = h.symmetric_eigen();
            let table = Self {
                rows,
                vecs: eig.eigenvectors,
                vals: eig.eigenvalues.iter().copied().collect(),
            };
            let probe = table.rows_at(C64::new(max_abs_beta, 0.0));
            let defect = (&probe * probe.adjoint() - CMatrix::identity(rows, rows)).norm();
            if defect <= 1e-10 {
                return Ok(table);
            }
            if pad > 4096 {
                return Err(Error::UnitarityDefect { defect, hint: big });
            }
            pad *= 2;
        }
    }

    fn rows_at(&self, beta: C64) -> CMatrix {
        let (r, theta) = (beta.norm(), beta.arg());
        let big = self.vecs.nrows();
        let mut left = self.vecs.rows(0, self.rows).into_owned();
        for (j, lam) in self.vals.iter().enumerate() {
            // exp(r(â† − â)) = exp(−ir·i(â† − â))
            let phase = C64::from_polar(1.0, -r * lam);
            for i in 0..self.rows {
                left[(i, j)] *= phase;
            }
        }
        let mut out = left * self.vecs.adjoint();
        for m in 0..self.rows {
            for k in 0..big {
                out[(m, k)] *= C64::from_polar(1.0, theta * (m as f64 - k as f64));
            }
        }
        out
    }
}

/// Fock amplitudes `⟨n|β⟩` for `n < len`, unnormalized by truncation.
fn coherent_amplitudes(beta: C64, len: usize) -> Vec<C64> {
    let mut amp = Vec::with_capacity(len);
    let mut c = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..len {
        if n > 0 {
            c *= beta / (n as f64).sqrt();
        }
        amp.push(c);
    }
    amp
}

/// Distance between `D(β)|0⟩` built in `cavity_dim` levels and the exact
/// coherent state.
fn truncation_defect(d: &CMatrix, beta: C64) -> f64 {
    let nc = d.nrows();
    let exact = coherent_amplitudes(beta, nc);
    let (tail, _) = coherent_tail(beta, nc, 0.0);
    let diff: f64 = (0..nc).map(|n| (d[(n, 0)] - exact[n]).norm_sqr()).sum();
    (diff + tail).sqrt()
}

/// `D(β) = exp(βâ† − β*â)` with the generator truncated to `cavity_dim`
/// levels; fails when `D(β)|0⟩` misses the exact coherent state by more
/// than [`UNITARITY_TOL`], with the smallest adequate `cavity_dim` as hint.
pub fn displacement_op(beta: C64, cavity_dim: usize) -> Result<OpMatrix> {
    let a = annihilation_op(cavity_dim)?;
    let gen = a.adjoint().matrix() * beta - a.matrix() * beta.conj();
    let d = OpMatrix::new(gen.exp(), BasisDims::cavity(cavity_dim))?;
    let defect = truncation_defect(d.matrix(), beta).max(d.unitarity_defect());
    if !(defect <= UNITARITY_TOL) {
        let (_, required) = coherent_tail(beta, cavity_dim, (0.1 * UNITARITY_TOL).powi(2));
        return Err(Error::UnitarityDefect {
            defect,
            hint: required.max(cavity_dim + 1),
        });
    }
    Ok(d)
}

fn displaced_parity(rho: &CMatrix, rows: &CMatrix) -> f64 {
    // Tr[ρ D P D†] = Σ_k (−1)^k ⟨k|D†ρD|k⟩ with ⟨m|D|k⟩ for m in the support of ρ
    let rd = rho * rows;
    let mut acc = 0.0;
    for k in 0..rows.ncols() {
        let mut diag = C64::new(0.0, 0.0);
        for m in 0..rows.nrows() {
            diag += rows[(m, k)].conj() * rd[(m, k)];
        }
        acc += if k % 2 == 0 { diag.re } else { -diag.re };
    }
    acc
}

/// Wigner function at a single phase-space point.
pub fn wigner_point(rho_cavity: &DensityOp, beta: C64) -> Result<f64> {
    check_cavity(rho_cavity)?;
    let table = DisplacementRows::new(rho_cavity.dim(), beta.norm())?;
    Ok(FRAC_2_PI * displaced_parity(rho_cavity.matrix(), &table.rows_at(beta)))
}

fn check_cavity(rho: &DensityOp) -> Result<()> {
    if rho.dims().qubit != 1 {
        return Err(Error::Shape("Wigner function needs a cavity-only state".into()));
    }
    Ok(())
}

pub fn wigner(rho_cavity: &DensityOp, grid: &GridSpec) -> Result<WignerGrid> {
    check_cavity(rho_cavity)?;
    grid.validate()?;
    let (xs, ps) = (grid.x_axis(), grid.p_axis());
    let rho = rho_cavity.matrix();
    let nc = rho_cavity.dim();
    let reach = xs.iter().map(|x| x * x).fold(0.0, f64::max) + ps.iter().map(|p| p * p).fold(0.0, f64::max);
    let table = DisplacementRows::new(nc, reach.sqrt())?;
    let values = xs
        .par_iter()
        .map(|&x| {
            ps.iter()
                .map(|&p| FRAC_2_PI * displaced_parity(rho, &table.rows_at(C64::new(x, p))))
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>();
    Ok(WignerGrid {
        x_axis: xs,
        p_axis: ps,
        values,
        convention: "beta = x + i p; W = (2/pi) Tr[rho D(beta) P D(beta)^dagger]".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::FockKet;
    use crate::states::{cat_ket, coherent_ket, CatSpec, Parity};
    use approx::assert_abs_diff_eq;

    #[test]
    fn displacement_basics() {
        let nc = 30;
        let id = displacement_op(C64::new(0.0, 0.0), nc).unwrap();
        assert!((id.matrix() - CMatrix::identity(nc, nc)).norm() < 1e-15);
        let beta = C64::new(0.7, -0.4);
        let d = displacement_op(beta, nc).unwrap();
        let vac = FockKet::fock(nc, 0).unwrap().apply(&d).unwrap();
        let coh = coherent_ket(beta, nc).unwrap();
        assert!((vac.amplitudes() - coh.amplitudes()).norm() < 1e-8);
        let back = d.mul(&displacement_op(-beta, nc).unwrap()).unwrap();
        assert!((back.matrix() - CMatrix::identity(nc, nc)).norm() < 1e-8);
    }

    #[test]
    fn displacement_reports_truncation() {
        let err = displacement_op(C64::new(4.0, 0.0), 8).unwrap_err();
        assert!(matches!(err, Error::UnitarityDefect { hint, .. } if hint > 8));
    }

    #[test]
    fn parity_anchors_origin() {
        let nc = 25;
        let vac = FockKet::fock(nc, 0).unwrap().to_density();
        assert_abs_diff_eq!(wigner_point(&vac, C64::new(0.0, 0.0)).unwrap(), FRAC_2_PI, epsilon = 1e-12);
        let one = FockKet::fock(nc, 1).unwrap().to_density();
        assert_abs_diff_eq!(wigner_point(&one, C64::new(0.0, 0.0)).unwrap(), -FRAC_2_PI, epsilon = 1e-12);
        let even = cat_ket(&CatSpec::real(1.5, Parity::Even).unwrap(), nc).unwrap().to_density();
        let odd = cat_ket(&CatSpec::real(1.5, Parity::Odd).unwrap(), nc).unwrap().to_density();
        assert!(wigner_point(&even, C64::new(0.0, 0.0)).unwrap() > 0.5);
        assert!(wigner_point(&odd, C64::new(0.0, 0.0)).unwrap() < -0.5);
    }

    #[test]
    fn coherent_state_gaussian() {
        let nc = 30;
        let beta = C64::new(1.0, 0.5);
        let rho = coherent_ket(beta, nc).unwrap().to_density();
        // W = (2/π) exp(−2|γ − β|²)
        for (x, p) in [(1.0, 0.5), (0.3, -0.2), (1.6, 1.1)] {
            let g = C64::new(x, p);
            let expected = FRAC_2_PI * (-2.0 * (g - beta).norm_sqr()).exp();
            assert_abs_diff_eq!(wigner_point(&rho, g).unwrap(), expected, epsilon = 1e-8);
        }
    }

    #[test]
    fn cat_grid_normalized_and_symmetric() {
        let nc = 25;
        let rho = cat_ket(&CatSpec::real(1.5, Parity::Even).unwrap(), nc).unwrap().to_density();
        let spec = GridSpec {
            nx: 41,
            np: 41,
            ..GridSpec::default()
        };
        let grid = wigner(&rho, &spec).unwrap();
        assert_abs_diff_eq!(grid.integral(), 1.0, epsilon = 2e-2);
        assert!(grid.inversion_asymmetry() < 1e-8);
        let bound = FRAC_2_PI + 1e-6;
        assert!(grid.values.iter().flatten().all(|w| w.abs() <= bound));
    }
}
