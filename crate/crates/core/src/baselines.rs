//! Generalized memory polynomial with least-squares identification, and
//! Adam training for the MLP baselines.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::{Mlp, MlpPreset};
use crate::signal::ComplexSeq;
use crate::training::{train_stage1_adam, AdamConfig, StageOutcome};

/// GMP orders and depths: aligned `(ka, la)`, lagging `(kb, lb, mb)` and
/// leading `(kc, lc, mc)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmpConfig {
    pub ka: usize,
    pub la: usize,
    pub kb: usize,
    pub lb: usize,
    pub mb: usize,
    pub kc: usize,
    pub lc: usize,
    pub mc: usize,
}

impl Default for GmpConfig {
    fn default() -> Self {
        Self::new(11, 7, 3, 2, 5, 2, 0, 3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Aligned,
    Lagging,
    Leading,
}

/// One basis column `x(n - l) |x(n - l + shift)|^k` with `shift` negative
/// for lagging and positive for leading envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GmpTerm {
    pub kind: TermKind,
    pub l: usize,
    pub m: usize,
    pub k: u32,
}

impl GmpTerm {
    fn envelope_offset(&self) -> isize {
        match self.kind {
            TermKind::Aligned => -(self.l as isize),
            TermKind::Lagging => -((self.l + self.m) as isize),
            TermKind::Leading => self.m as isize - self.l as isize,
        }
    }

    pub fn eval(&self, x: &[Complex64], n: usize) -> Complex64 {
        let s = x[n - self.l];
        let e = x[(n as isize + self.envelope_offset()) as usize].norm();
        s * e.powi(self.k as i32)
    }
}

impl GmpConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(ka: usize, la: usize, kb: usize, lb: usize, mb: usize, kc: usize, lc: usize, mc: usize) -> Self {
        Self {
            ka,
            la,
            kb,
            lb,
            mb,
            kc,
            lc,
            mc,
        }
    }

    pub fn term_count(&self) -> usize {
        self.ka * self.la + self.kb * self.lb * self.mb + self.kc * self.lc * self.mc
    }

    pub fn validate(&self) -> Result<()> {
        if self.term_count() == 0 {
            return Err(Error::Config("GMP configuration has no terms".into()));
        }
        Ok(())
    }

    /// Columns in order: aligned, lagging, leading; delay-major, then
    /// envelope shift, then order. Aligned `k` runs `0..ka`, the others `1..=k`.
    pub fn columns(&self) -> Vec<GmpTerm> {
        let mut cols = Vec::with_capacity(self.term_count());
        for l in 0..self.la {
            for k in 0..self.ka {
                cols.push(GmpTerm {
                    kind: TermKind::Aligned,
                    l,
                    m: 0,
                    k: k as u32,
                });
            }
        }
        for (kind, kk, ll, mm) in [
            (TermKind::Lagging, self.kb, self.lb, self.mb),
            (TermKind::Leading, self.kc, self.lc, self.mc),
        ] {
            for l in 0..ll {
                for m in 1..=mm {
                    for k in 1..=kk {
                        cols.push(GmpTerm { kind, l, m, k: k as u32 });
                    }
                }
            }
        }
        cols
    }

    /// Oldest sample any column reaches back to.
    pub fn max_lag(&self) -> usize {
        self.columns()
            .iter()
            .map(|t| t.l.max((-t.envelope_offset()).max(0) as usize))
            .max()
            .unwrap_or(0)
    }

    /// Furthest future sample any column reaches.
    pub fn max_lead(&self) -> usize {
        self.columns()
            .iter()
            .map(|t| t.envelope_offset().max(0) as usize)
            .max()
            .unwrap_or(0)
    }
}

/// Basis matrix over output indices `first .. first + rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmpBasis {
    pub config: GmpConfig,
    pub first: usize,
    pub matrix: DMatrix<Complex64>,
}

impl GmpBasis {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn row_of(&self, n: usize) -> Option<usize> {
        (n >= self.first && n < self.first + self.rows()).then(|| n - self.first)
    }

    /// Keep only the rows for the given sample indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let rows: Vec<usize> = indices.iter().filter_map(|&n| self.row_of(n)).collect();
        let matrix = DMatrix::from_fn(rows.len(), self.matrix.ncols(), |i, j| self.matrix[(rows[i], j)]);
        Self {
            config: self.config,
            first: 0,
            matrix,
        }
    }
}

pub fn gmp_basis(x: &ComplexSeq, cfg: &GmpConfig) -> Result<GmpBasis> {
    cfg.validate()?;
    let (lag, lead) = (cfg.max_lag(), cfg.max_lead());
    let n = x.len();
    if n <= lag + lead {
        return Err(Error::Size {
            needed: lag + lead + 1,
            available: n,
        });
    }
    let cols = cfg.columns();
    let xs = x.samples();
    let rows = n - lag - lead;
    let matrix = DMatrix::from_fn(rows, cols.len(), |i, j| cols[j].eval(xs, i + lag));
    Ok(GmpBasis {
        config: *cfg,
        first: lag,
        matrix,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmpModel {
    pub config: GmpConfig,
    pub coeffs: Vec<Complex64>,
}

/// Least-squares fit of `basis * c ~ y` with optional ridge. `y` holds one
/// target per basis row.
pub fn gmp_fit_ls(basis: &GmpBasis, y: &[Complex64], ridge: f64) -> Result<GmpModel> {
    let a = &basis.matrix;
    let (rows, cols) = a.shape();
    if y.len() != rows {
        return Err(Error::LengthMismatch { left: rows, right: y.len() });
    }
    if rows < cols {
        return Err(Error::Size {
            needed: cols,
            available: rows,
        });
    }
    if !(ridge >= 0.0) {
        return Err(Error::Config(format!("ridge {ridge} must be >= 0")));
    }
    // Equilibrate columns; the ridge is applied in the original scaling.
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    if norms.contains(&0.0) && ridge == 0.0 {
        return Err(Error::Solver("basis has an all-zero column; add a ridge".into()));
    }
    let scale: Vec<f64> = norms.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect();
    let mut s = a.clone();
    for (j, &f) in scale.iter().enumerate() {
        s.column_mut(j).scale_mut(f);
    }
    let yv = DVector::from_column_slice(y);

    let mut gram = s.ad_mul(&s);
    for j in 0..cols {
        gram[(j, j)] += Complex64::new(ridge * scale[j] * scale[j], 0.0);
    }
    let rhs = s.ad_mul(&yv);
    let conditioned = gram
        .clone()
        .cholesky()
        .filter(|c| {
            let d: Vec<f64> = (0..cols).map(|j| c.l_dirty()[(j, j)].re.abs()).collect();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            ridge > 0.0 || lo / hi > 1e-6
        });
    let z = match conditioned {
        Some(c) => c.solve(&rhs),
        None if ridge > 0.0 => return Err(Error::Solver("regularized normal equations not positive definite".into())),
        None => {
            let qr = s.qr();
            let r = qr.r();
            let d: Vec<f64> = (0..cols).map(|j| r[(j, j)].norm()).collect();
            let max = d.iter().cloned().fold(0.0, f64::max);
            if d.iter().any(|&v| v <= 1e-12 * max) {
                return Err(Error::Solver("rank-deficient GMP basis; use a ridge".into()));
            }
            let qty = qr.q().ad_mul(&yv);
            r.solve_upper_triangular(&qty)
                .ok_or_else(|| Error::Solver("triangular solve failed".into()))?
        }
    };
    let coeffs: Vec<Complex64> = z.iter().zip(&scale).map(|(c, f)| c * f).collect();
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("GMP coefficients".into()));
    }
    Ok(GmpModel {
        config: basis.config,
        coeffs,
    })
}

impl GmpModel {
    pub fn predict(&self, basis: &GmpBasis) -> Result<Vec<Complex64>> {
        if basis.config != self.config || basis.matrix.ncols() != self.coeffs.len() {
            return Err(Error::Shape("basis does not match the GMP model".into()));
        }
        let c = DVector::from_column_slice(&self.coeffs);
        Ok((&basis.matrix * c).iter().copied().collect())
    }
}

/// Model output over indices `max_lag .. len - max_lead` of `x`.
pub fn gmp_forward(model: &GmpModel, x: &ComplexSeq) -> Result<ComplexSeq> {
    let basis = gmp_basis(x, &model.config)?;
    x.with_samples(model.predict(&basis)?)
}

/// GMP fitted on the train entries' sample indices, evaluated on the test ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmpEvaluation {
    pub model: GmpModel,
    pub nmse_train_db: f64,
    pub nmse_test_db: f64,
}

pub fn fit_gmp_on_split(
    x: &ComplexSeq,
    y: &ComplexSeq,
    cfg: &GmpConfig,
    train: &Dataset,
    test: &Dataset,
    ridge: f64,
) -> Result<GmpEvaluation> {
    let basis = gmp_basis(x, cfg)?;
    let pick = |d: &Dataset| -> (GmpBasis, Vec<Complex64>) {
        let idx: Vec<usize> = d
            .entries
            .iter()
            .map(|e| e.index)
            .filter(|&n| basis.row_of(n).is_some())
            .collect();
        (basis.select(&idx), idx.iter().map(|&n| y.samples()[n]).collect())
    };
    let (btr, ytr) = pick(train);
    let (bte, yte) = pick(test);
    let model = gmp_fit_ls(&btr, &ytr, ridge)?;
    let nmse = |b: &GmpBasis, t: &[Complex64]| -> Result<f64> {
        crate::metrics::nmse_db_slices(&model.predict(b)?, t)
    };
    Ok(GmpEvaluation {
        nmse_train_db: nmse(&btr, &ytr)?,
        nmse_test_db: nmse(&bte, &yte)?,
        model,
    })
}

/// A trained MLP baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpBaseline {
    pub preset: MlpPreset,
    pub net: Mlp,
    pub training: StageOutcome,
}

pub fn train_mlp_baseline(
    preset: MlpPreset,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &AdamConfig,
    seed: u64,
) -> Result<MlpBaseline> {
    let mut net = Mlp::preset(preset, train.memory_depth, seed)?;
    let training = train_stage1_adam(&mut net, train, test, cfg)?;
    Ok(MlpBaseline { preset, net, training })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::nmse_db_slices;
    use crate::signal::{generate_ofdm, OfdmConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn drive(n_symbols: usize) -> ComplexSeq {
        generate_ofdm(&OfdmConfig {
            n_symbols,
            ..OfdmConfig::default()
        })
        .unwrap()
    }

    fn random_coeffs(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn single_linear_column() {
        let x = drive(2);
        let cfg = GmpConfig::new(1, 1, 0, 0, 0, 0, 0, 0);
        let b = gmp_basis(&x, &cfg).unwrap();
        assert_eq!(b.matrix.ncols(), 1);
        assert_eq!(b.rows(), x.len());
        for (i, v) in x.samples().iter().enumerate() {
            assert_eq!(b.matrix[(i, 0)], *v);
        }
    }

    #[test]
    fn table_configuration_terms() {
        let cfg = GmpConfig::default();
        assert_eq!(cfg.term_count(), 107);
        let cols = cfg.columns();
        assert_eq!(cols.len(), 107);
        assert_eq!(cols.iter().filter(|t| t.kind == TermKind::Aligned).count(), 77);
        assert_eq!(cols.iter().filter(|t| t.kind == TermKind::Lagging).count(), 30);
        assert_eq!(cols.iter().filter(|t| t.kind == TermKind::Leading).count(), 0);
        assert_eq!((cfg.max_lag(), cfg.max_lead()), (6, 0));
        assert!(GmpConfig::new(0, 0, 0, 0, 0, 0, 0, 0).validate().is_err());
    }

    #[test]
    fn columns_match_direct_formula() {
        let x = drive(2);
        let cfg = GmpConfig::new(3, 2, 2, 2, 2, 2, 2, 2);
        assert_eq!((cfg.max_lag(), cfg.max_lead()), (3, 2));
        let b = gmp_basis(&x, &cfg).unwrap();
        let xs = x.samples();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = rng.random_range(b.first..b.first + b.rows());
            let row = b.row_of(n).unwrap();
            let mut j = 0;
            for l in 0..2 {
                for k in 0..3 {
                    assert_eq!(b.matrix[(row, j)], xs[n - l] * xs[n - l].norm().powi(k));
                    j += 1;
                }
            }
            for sign in [-1isize, 1] {
                for l in 0..2usize {
                    for m in 1..=2isize {
                        for k in 1..=2 {
                            let e = xs[(n as isize - l as isize + sign * m) as usize].norm().powi(k);
                            assert_eq!(b.matrix[(row, j)], xs[n - l] * e);
                            j += 1;
                        }
                    }
                }
            }
            assert_eq!(j, cfg.term_count());
        }
    }

    #[test]
    fn scaled_column_recovered() {
        let x = drive(4);
        let cfg = GmpConfig::new(3, 2, 0, 0, 0, 0, 0, 0);
        let b = gmp_basis(&x, &cfg).unwrap();
        let y: Vec<Complex64> = (0..b.rows()).map(|i| 2.0 * b.matrix[(i, 4)]).collect();
        let m = gmp_fit_ls(&b, &y, 0.0).unwrap();
        for (j, c) in m.coeffs.iter().enumerate() {
            let want = if j == 4 { 2.0 } else { 0.0 };
            assert!((c - want).norm() < 1e-9, "coefficient {j} = {c}");
        }
    }

    #[test]
    fn self_recovery() {
        let x = drive(40);
        let cfg = GmpConfig::default();
        let truth = GmpModel {
            config: cfg,
            coeffs: random_coeffs(cfg.term_count(), 2),
        };
        let y = gmp_forward(&truth, &x).unwrap();
        let b = gmp_basis(&x, &cfg).unwrap();
        let fit = gmp_fit_ls(&b, y.samples(), 0.0).unwrap();
        let pred = fit.predict(&b).unwrap();
        let nmse = nmse_db_slices(&pred, y.samples()).unwrap();
        assert!(nmse <= -100.0, "nmse {nmse}");
    }

    #[test]
    fn residual_orthogonal_and_optimal() {
        let x = drive(10);
        let cfg = GmpConfig::new(4, 3, 2, 1, 2, 0, 0, 0);
        let b = gmp_basis(&x, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<Complex64> = (0..b.rows())
            .map(|i| b.matrix[(i, 0)] * 0.9 + Complex64::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01)))
            .collect();
        let m = gmp_fit_ls(&b, &y, 0.0).unwrap();
        let pred = m.predict(&b).unwrap();
        let r = DVector::from_iterator(y.len(), y.iter().zip(&pred).map(|(a, p)| a - p));
        let proj = b.matrix.ad_mul(&r);
        for j in 0..proj.len() {
            let rel = proj[j].norm() / (b.matrix.column(j).norm() * r.norm());
            assert!(rel < 1e-8, "column {j}: {rel}");
        }
        let best = nmse_db_slices(&pred, &y).unwrap();
        for s in 0..10 {
            let mut other = m.clone();
            for (c, d) in other.coeffs.iter_mut().zip(random_coeffs(cfg.term_count(), 10 + s)) {
                *c += d * 1e-4;
            }
            assert!(nmse_db_slices(&other.predict(&b).unwrap(), &y).unwrap() >= best);
        }
        let ridged = gmp_fit_ls(&b, &y, 1e-6).unwrap();
        let with_ridge = nmse_db_slices(&ridged.predict(&b).unwrap(), &y).unwrap();
        assert!((with_ridge - best).abs() < 0.1);
    }

    #[test]
    fn rank_deficient_needs_ridge() {
        let x = drive(2);
        let cfg = GmpConfig::new(2, 1, 0, 0, 0, 0, 0, 0);
        let mut b = gmp_basis(&x, &cfg).unwrap();
        let first = b.matrix.column(0).clone_owned();
        b.matrix.set_column(1, &first);
        let y: Vec<Complex64> = first.iter().copied().collect();
        assert!(matches!(gmp_fit_ls(&b, &y, 0.0), Err(Error::Solver(_))));
        assert!(gmp_fit_ls(&b, &y, 1e-3).is_ok());
    }

    #[test]
    fn forward_trivial_models() {
        let x = drive(2);
        let cfg = GmpConfig::new(2, 2, 0, 0, 0, 0, 0, 0);
        let zero = GmpModel {
            config: cfg,
            coeffs: vec![Complex64::new(0.0, 0.0); 4],
        };
        assert!(gmp_forward(&zero, &x).unwrap().samples().iter().all(|v| v.norm() == 0.0));
        let mut lin = zero.clone();
        lin.coeffs[0] = Complex64::new(0.5, 0.25);
        let y = gmp_forward(&lin, &x).unwrap();
        assert_eq!(y.len(), x.len() - 1);
        for (i, v) in y.samples().iter().enumerate() {
            assert!((v - x.samples()[i + 1] * Complex64::new(0.5, 0.25)).norm() < 1e-15);
        }
    }

    #[test]
    fn json_roundtrip() {
        let m = GmpModel {
            config: GmpConfig::default(),
            coeffs: random_coeffs(107, 4),
        };
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("[") && s.contains("\"ka\":11"));
        assert_eq!(serde_json::from_str::<GmpModel>(&s).unwrap(), m);
    }
}
