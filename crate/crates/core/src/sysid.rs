//! Truncated SVD, pseudoinversion and DMD / DMDc system identification.
//!
//! DMD estimates `A` from a time-shifted snapshot pair `X' ≈ A X`. DMDc
//! stacks the exogenous channels under the state, `X' ≈ A X + B Υ`, and reads
//! both operators off one truncated SVD of `[X; Υ]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{DelayConfig, SnapshotMatrices};

/// Singular values below `PINV_RTOL * sigma_max` are treated as zero.
pub const PINV_RTOL: f64 = 1e-12;

/// Default energy fraction kept by [`RankPolicy::Energy`].
pub const DEFAULT_ENERGY: f64 = 0.999;

/// How many singular triplets to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum RankPolicy {
    /// Keep exactly `r` triplets.
    Fixed(usize),
    /// Keep the smallest `r` whose squared singular values reach this
    /// fraction of the total.
    Energy(f64),
    /// Keep everything.
    Full,
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::Energy(DEFAULT_ENERGY)
    }
}

/// Thin SVD factors `M ≈ Ψ diag(Σ) Vᵀ`, singular values descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub psi: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.psi * DMatrix::from_diagonal(&self.sigma) * self.v.transpose()
    }

    /// Drops trailing triplets whose singular value is below `PINV_RTOL * sigma_max`.
    fn numerically_nonzero(mut self) -> Self {
        let smax = self.sigma.iter().copied().fold(0.0, f64::max);
        let keep = self.sigma.iter().take_while(|&&s| s > PINV_RTOL * smax).count();
        if keep < self.sigma.len() {
            self.psi = self.psi.columns(0, keep).into_owned();
            self.v = self.v.columns(0, keep).into_owned();
            self.sigma = self.sigma.rows(0, keep).into_owned();
        }
        self
    }
}

/// Full thin SVD with singular values sorted in descending order.
fn full_svd(m: &DMatrix<f64>) -> Result<SvdFactors> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Shape(format!("cannot decompose an empty {}x{} matrix", m.nrows(), m.ncols())));
    }
    if let Some(bad) = m.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite { value: *bad, context: "matrix passed to SVD".into() });
    }
    let fm = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = fm
        .thin_svd()
        .map_err(|e| Error::Degenerate(format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let k = order.len();
    let psi = DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]);
    let v = DMatrix::from_fn(v.nrows(), k, |i, j| v[(i, order[j])]);
    let sigma = DVector::from_iterator(k, order.iter().map(|&j| s[j].max(0.0)));
    Ok(SvdFactors { psi, sigma, v })
}

fn energy_rank(sigma: &DVector<f64>, eta: f64) -> usize {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 1;
    }
    let target = eta * total * (1.0 - 4.0 * f64::EPSILON);
    let mut acc = 0.0;
    for (i, s) in sigma.iter().enumerate() {
        acc += s * s;
        if acc >= target {
            return i + 1;
        }
    }
    sigma.len()
}

/// SVD truncated according to `policy`.
pub fn truncated_svd(m: &DMatrix<f64>, policy: RankPolicy) -> Result<SvdFactors> {
    let full = full_svd(m)?;
    let max_rank = full.rank();
    let r = match policy {
        RankPolicy::Fixed(0) => return Err(Error::Parameter("rank must be positive".into())),
        RankPolicy::Fixed(r) if r > max_rank => {
            return Err(Error::Parameter(format!(
                "rank {r} exceeds min(rows, cols) = {max_rank}"
            )))
        }
        RankPolicy::Fixed(r) => r,
        RankPolicy::Energy(eta) if !(eta > 0.0 && eta <= 1.0) => {
            return Err(Error::Parameter(format!("energy fraction must lie in (0, 1], got {eta}")))
        }
        RankPolicy::Energy(eta) => energy_rank(&full.sigma, eta),
        RankPolicy::Full => max_rank,
    };
    Ok(SvdFactors {
        psi: full.psi.columns(0, r).into_owned(),
        sigma: full.sigma.rows(0, r).into_owned(),
        v: full.v.columns(0, r).into_owned(),
    })
}

/// Moore–Penrose pseudoinverse.
pub fn pseudoinverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let f = full_svd(m)?.numerically_nonzero();
    let inv = f.sigma.map(|s| 1.0 / s);
    Ok(&f.v * DMatrix::from_diagonal(&inv) * f.psi.transpose())
}

/// Least-squares DMD operator `A = X' X†`.
pub fn dmd_fit(snaps: &SnapshotMatrices) -> Result<DMatrix<f64>> {
    if snaps.input_dim() != 0 {
        return Err(Error::Shape(format!(
            "plain DMD takes no inputs, got {} input rows; use dmdc_fit",
            snaps.input_dim()
        )));
    }
    Ok(&snaps.x_next * pseudoinverse(&snaps.x)?)
}

/// Reduced operator acting on projected coordinates `α = Ψ_rᵀ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub atilde: DMatrix<f64>,
    pub basis: DMatrix<f64>,
}

impl ReducedModel {
    pub fn rank(&self) -> usize {
        self.atilde.nrows()
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(x)
    }

    pub fn step(&self, alpha: &DVector<f64>) -> DVector<f64> {
        &self.atilde * alpha
    }
}

/// Projected DMD: `Ã = Ψ_rᵀ X' V_r Σ_r⁻¹`.
pub fn dmd_fit_reduced(snaps: &SnapshotMatrices, policy: RankPolicy) -> Result<ReducedModel> {
    if snaps.input_dim() != 0 {
        return Err(Error::Shape("reduced DMD takes no inputs".into()));
    }
    let f = truncated_svd(&snaps.x, policy)?.numerically_nonzero();
    if f.rank() == 0 {
        return Err(Error::Degenerate("snapshot matrix is numerically zero".into()));
    }
    let inv = DMatrix::from_diagonal(&f.sigma.map(|s| 1.0 / s));
    let atilde = f.psi.tr_mul(&snaps.x_next) * &f.v * inv;
    Ok(ReducedModel { atilde, basis: f.psi })
}

/// Identified linear time-invariant model `x_{k+1} = A x_k + B y_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub delay: DelayConfig,
    pub state_channel: String,
    pub input_channels: Vec<String>,
}

impl LtiModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        delay: DelayConfig,
        state_channel: impl Into<String>,
        input_channels: Vec<String>,
    ) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::Shape(format!(
                "B has {} rows, A has dimension {}",
                b.nrows(),
                a.nrows()
            )));
        }
        if b.ncols() != input_channels.len() {
            return Err(Error::Shape(format!(
                "B has {} columns for {} input channels",
                b.ncols(),
                input_channels.len()
            )));
        }
        Ok(Self { a, b, delay, state_channel: state_channel.into(), input_channels })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// One-step prediction `A x + B y`.
    pub fn predict(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut next = &self.a * x;
        if self.input_dim() > 0 {
            next += &self.b * y;
        }
        next
    }
}

/// `(A, B)` from a truncated SVD of the stacked matrix `[X; Υ]`.
///
/// With no input rows this is projected DMD and `B` has width zero; at full
/// rank it equals `X' [X; Υ]†`.
pub fn dmdc_operators(snaps: &SnapshotMatrices, policy: RankPolicy) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = snaps.state_dim();
    let p = snaps.input_dim();
    let m = snaps.len();
    if m == 0 || n == 0 {
        return Err(Error::InsufficientData("no snapshots".into()));
    }
    let mut stacked = DMatrix::zeros(n + p, m);
    stacked.rows_mut(0, n).copy_from(&snaps.x);
    if p > 0 {
        stacked.rows_mut(n, p).copy_from(&snaps.inputs);
    }
    if stacked.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("stacked snapshot matrix is identically zero".into()));
    }
    let f = truncated_svd(&stacked, policy)?.numerically_nonzero();
    let inv = DMatrix::from_diagonal(&f.sigma.map(|s| 1.0 / s));
    let core = &snaps.x_next * &f.v * inv;
    let a = &core * f.psi.rows(0, n).transpose();
    let b = if p > 0 { &core * f.psi.rows(n, p).transpose() } else { DMatrix::zeros(n, 0) };
    Ok((a, b))
}

/// DMDc fit wrapped as an [`LtiModel`].
pub fn dmdc_fit(
    snaps: &SnapshotMatrices,
    policy: RankPolicy,
    delay: DelayConfig,
    state_channel: &str,
    input_channels: &[String],
) -> Result<LtiModel> {
    let (a, b) = dmdc_operators(snaps, policy)?;
    LtiModel::new(a, b, delay, state_channel, input_channels.to_vec())
}

/// Eigenvalues with multiplicity, sorted by descending magnitude then
/// descending real part (then positive imaginary part first).
///
/// Complex eigenvalues of a real matrix are returned as exact conjugate pairs.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::Shape(format!("eigenvalues need a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if let Some(bad) = a.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite { value: *bad, context: "matrix passed to eigenvalues".into() });
    }
    let raw: Vec<Complex64> =
        a.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect();
    let scale = raw.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale;

    let mut real = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for z in raw {
        if z.im.abs() <= tol {
            real.push(Complex64::new(z.re, 0.0));
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            lower.push(z);
        }
    }
    let mut out = real;
    if upper.len() == lower.len() {
        let mut used = vec![false; lower.len()];
        for z in upper {
            let (j, _) = lower
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .min_by(|(_, p), (_, q)| (*p - z.conj()).norm().total_cmp(&(*q - z.conj()).norm()))
                .expect("paired counts");
            used[j] = true;
            let w = lower[j];
            let re = 0.5 * (z.re + w.re);
            let im = 0.5 * (z.im - w.im);
            out.push(Complex64::new(re, im));
            out.push(Complex64::new(re, -im));
        }
    } else {
        out.extend(upper);
        out.extend(lower);
    }
    out.sort_by(|p, q| {
        q.norm()
            .total_cmp(&p.norm())
            .then(q.re.total_cmp(&p.re))
            .then(q.im.total_cmp(&p.im))
    });
    Ok(out)
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.first().map_or(0.0, |z| z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{delay_embed, snapshot_matrices};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    /// Independent oracle: cyclic Jacobi eigenvalue iteration on the
    /// symmetric matrix MᵀM; singular values are the square roots.
    fn jacobi_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
        let mut s = m.transpose() * m;
        let n = s.nrows();
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| s[(i, j)].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if s[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (s[(q, q)] - s[(p, p)]) / (2.0 * s[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for k in 0..n {
                        let skp = s[(k, p)];
                        let skq = s[(k, q)];
                        s[(k, p)] = c * skp - sn * skq;
                        s[(k, q)] = sn * skp + c * skq;
                    }
                    for k in 0..n {
                        let spk = s[(p, k)];
                        let sqk = s[(q, k)];
                        s[(p, k)] = c * spk - sn * sqk;
                        s[(q, k)] = sn * spk + c * sqk;
                    }
                }
            }
        }
        let mut vals: Vec<f64> = (0..n).map(|i| s[(i, i)].max(0.0).sqrt()).collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        vals
    }

    #[test]
    fn svd_identity() {
        let f = truncated_svd(&DMatrix::identity(3, 3), RankPolicy::Fixed(3)).unwrap();
        assert_eq!(f.sigma.len(), 3);
        for s in f.sigma.iter() {
            assert_relative_eq!(*s, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn svd_rank_one() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let v = DVector::from_vec(vec![0.3, 1.0, -1.5]);
        let f = truncated_svd(&(&u * v.transpose()), RankPolicy::Full).unwrap();
        assert_eq!(f.sigma.iter().filter(|&&s| s > 1e-12).count(), 1);
    }

    #[test]
    fn svd_empty_is_error() {
        assert!(truncated_svd(&DMatrix::zeros(0, 3), RankPolicy::Full).is_err());
    }

    #[test]
    fn svd_truncation_error_matches_jacobi_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(5, 5, &mut rng);
        let oracle = jacobi_singular_values(&m);
        let f = truncated_svd(&m, RankPolicy::Fixed(3)).unwrap();
        let err = (&m - f.reconstruct()).norm();
        let tail = (oracle[3].powi(2) + oracle[4].powi(2)).sqrt();
        assert_relative_eq!(err, tail, max_relative = 1e-9);
        for (s, o) in f.sigma.iter().zip(&oracle) {
            assert_relative_eq!(*s, *o, max_relative = 1e-9);
        }
        assert!(err <= oracle[3] * 5f64.sqrt());
    }

    #[test]
    fn svd_energy_policy() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 1.0, 0.1]));
        // energies 100, 1, 0.01 of 101.01
        assert_eq!(truncated_svd(&m, RankPolicy::Energy(0.98)).unwrap().rank(), 1);
        assert_eq!(truncated_svd(&m, RankPolicy::Energy(0.999)).unwrap().rank(), 2);
        assert_eq!(truncated_svd(&m, RankPolicy::Energy(1.0)).unwrap().rank(), 3);
        assert!(truncated_svd(&m, RankPolicy::Energy(0.0)).is_err());
        assert!(truncated_svd(&m, RankPolicy::Fixed(4)).is_err());
    }

    #[test]
    fn svd_factors_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(6, 9, &mut rng);
        let f = truncated_svd(&m, RankPolicy::Full).unwrap();
        let i = DMatrix::<f64>::identity(6, 6);
        assert!((f.psi.tr_mul(&f.psi) - &i).amax() < 1e-10);
        assert!((f.v.tr_mul(&f.v) - &i).amax() < 1e-10);
        assert!(f.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pinv_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let p = pseudoinverse(&m).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]);
        assert!((p - expect).amax() < 1e-15);
    }

    #[test]
    fn pinv_zero() {
        let p = pseudoinverse(&DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(p, DMatrix::zeros(2, 3));
    }

    fn penrose_residuals(m: &DMatrix<f64>) -> [f64; 4] {
        let p = pseudoinverse(m).unwrap();
        let mp = m * &p;
        let pm = &p * m;
        [
            (&mp * m - m).amax(),
            (&pm * &p - &p).amax(),
            (&mp - mp.transpose()).amax(),
            (&pm - pm.transpose()).amax(),
        ]
    }

    #[test]
    fn pinv_penrose_random_4x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(4, 3, &mut rng);
        assert!(penrose_residuals(&m).iter().all(|&r| r < 1e-9));
    }

    proptest! {
        #[test]
        fn penrose_conditions(rows in 1usize..7, cols in 1usize..7, rank_cut in 0usize..3, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = random_matrix(rows, cols, &mut rng);
            // occasionally rank-deficient
            for j in 0..rank_cut.min(cols.saturating_sub(1)) {
                let src = m.column(cols - 1).into_owned();
                m.set_column(j, &src);
            }
            for r in penrose_residuals(&m) {
                prop_assert!(r < 1e-9, "residual {}", r);
            }
        }
    }

    #[test]
    fn dmd_identity_dynamics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_matrix(3, 10, &mut rng);
        let snaps = SnapshotMatrices { x: x.clone(), x_next: x, inputs: DMatrix::zeros(0, 10) };
        let a = dmd_fit(&snaps).unwrap();
        assert!((a - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn dmd_scalar_doubling() {
        let states = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 4.0, 8.0]);
        let snaps = snapshot_matrices(&states, &DMatrix::zeros(0, 4)).unwrap();
        let a = dmd_fit(&snaps).unwrap();
        assert_relative_eq!(a[(0, 0)], 2.0, epsilon = 1e-12);
    }

    fn stable_matrix(n: usize, radius_bound: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = random_matrix(n, n, rng);
        // spectral radius <= 2-norm <= Frobenius norm
        let scale = radius_bound / m.norm();
        m * scale
    }

    fn simulate(a: &DMatrix<f64>, b: &DMatrix<f64>, steps: usize, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = a.nrows();
        let p = b.ncols();
        let inputs = random_matrix(p, steps + 1, rng);
        let mut states = DMatrix::zeros(n, steps + 1);
        states.set_column(0, &DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)));
        for k in 0..steps {
            let mut next = a * states.column(k);
            if p > 0 {
                next += b * inputs.column(k);
            }
            states.set_column(k + 1, &next);
        }
        (states, inputs)
    }

    #[test]
    fn dmd_recovers_stable_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a_true = stable_matrix(4, 0.95, &mut rng);
        // excite every direction: restart from a fresh random state every 20 steps
        let mut cols = Vec::new();
        let mut next_cols = Vec::new();
        for _ in 0..10 {
            let (states, _) = simulate(&a_true, &DMatrix::zeros(4, 0), 20, &mut rng);
            for k in 0..20 {
                cols.push(states.column(k).into_owned());
                next_cols.push(states.column(k + 1).into_owned());
            }
        }
        let snaps = SnapshotMatrices {
            x: DMatrix::from_columns(&cols),
            x_next: DMatrix::from_columns(&next_cols),
            inputs: DMatrix::zeros(0, cols.len()),
        };
        let a = dmd_fit(&snaps).unwrap();
        assert!((&a - &a_true).norm() / a_true.norm() < 1e-8);
    }

    #[test]
    fn dmd_trajectory_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a_true = stable_matrix(4, 0.99, &mut rng);
        let (states, _) = simulate(&a_true, &DMatrix::zeros(4, 0), 200, &mut rng);
        let snaps = snapshot_matrices(&states, &DMatrix::zeros(0, 201)).unwrap();
        let a = dmd_fit(&snaps).unwrap();
        // an autonomous trajectory decays; compare on the well-excited prefix
        assert!((&a - &a_true).norm() / a_true.norm() < 1e-6, "{}", (&a - &a_true).norm() / a_true.norm());
    }

    #[test]
    fn dmd_rejects_inputs() {
        let snaps = SnapshotMatrices { x: DMatrix::zeros(1, 3), x_next: DMatrix::zeros(1, 3), inputs: DMatrix::zeros(1, 3) };
        assert!(dmd_fit(&snaps).is_err());
    }

    fn sorted_spectrum(m: &DMatrix<f64>) -> Vec<Complex64> {
        eigenvalues(m).unwrap()
    }

    #[test]
    fn reduced_full_rank_matches_dmd_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a_true = stable_matrix(5, 0.9, &mut rng);
        let x = random_matrix(5, 40, &mut rng);
        let x_next = &a_true * &x;
        let snaps = SnapshotMatrices { x, x_next, inputs: DMatrix::zeros(0, 40) };
        let a = dmd_fit(&snaps).unwrap();
        let reduced = dmd_fit_reduced(&snaps, RankPolicy::Full).unwrap();
        let full = sorted_spectrum(&a);
        let red = sorted_spectrum(&reduced.atilde);
        assert_eq!(full.len(), red.len());
        for (p, q) in full.iter().zip(&red) {
            assert!((p - q).norm() < 1e-8, "{p} vs {q}");
        }
        let i = DMatrix::<f64>::identity(5, 5);
        assert!((reduced.basis.tr_mul(&reduced.basis) - i).amax() < 1e-10);
    }

    #[test]
    fn reduced_rank_one_decay() {
        let dir = DVector::from_vec(vec![1.0, 2.0, -0.5]);
        let states = DMatrix::from_fn(3, 30, |i, k| dir[i] * 0.9f64.powi(k as i32));
        let snaps = snapshot_matrices(&states, &DMatrix::zeros(0, 30)).unwrap();
        let reduced = dmd_fit_reduced(&snaps, RankPolicy::Fixed(1)).unwrap();
        assert_eq!(reduced.rank(), 1);
        assert_relative_eq!(reduced.atilde[(0, 0)], 0.9, epsilon = 1e-12);
        let alpha = reduced.project(&states.column(4).into_owned());
        let next = reduced.step(&alpha);
        let expect = reduced.project(&states.column(5).into_owned());
        assert_relative_eq!(next[0], expect[0], epsilon = 1e-12);
    }

    #[test]
    fn reduced_identity_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_matrix(3, 8, &mut rng);
        let snaps = SnapshotMatrices { x: x.clone(), x_next: x, inputs: DMatrix::zeros(0, 8) };
        let reduced = dmd_fit_reduced(&snaps, RankPolicy::Fixed(1)).unwrap();
        assert_relative_eq!(reduced.atilde[(0, 0)], 1.0, epsilon = 1e-12);
        assert!(dmd_fit_reduced(&snaps, RankPolicy::Fixed(0)).is_err());
    }

    #[test]
    fn dmdc_without_inputs_matches_dmd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_matrix(3, 20, &mut rng);
        let x_next = random_matrix(3, 20, &mut rng);
        let snaps = SnapshotMatrices { x, x_next, inputs: DMatrix::zeros(0, 20) };
        let (a, b) = dmdc_operators(&snaps, RankPolicy::Full).unwrap();
        assert_eq!(b.shape(), (3, 0));
        assert!((a - dmd_fit(&snaps).unwrap()).amax() < 1e-10);
    }

    #[test]
    fn dmdc_recovers_a_and_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a_true = stable_matrix(4, 0.9, &mut rng);
        let b_true = random_matrix(4, 2, &mut rng);
        let (states, inputs) = simulate(&a_true, &b_true, 500, &mut rng);
        let snaps = snapshot_matrices(&states, &inputs).unwrap();
        let (a, b) = dmdc_operators(&snaps, RankPolicy::Full).unwrap();
        assert!((&a - &a_true).norm() / a_true.norm() < 1e-8);
        assert!((&b - &b_true).norm() / b_true.norm() < 1e-8);
        // pinv route agrees
        let mut stacked = DMatrix::zeros(6, snaps.len());
        stacked.rows_mut(0, 4).copy_from(&snaps.x);
        stacked.rows_mut(4, 2).copy_from(&snaps.inputs);
        let ab = &snaps.x_next * pseudoinverse(&stacked).unwrap();
        assert!((ab.columns(0, 4) - &a).amax() < 1e-9);
        assert!((ab.columns(4, 2) - &b).amax() < 1e-9);
    }

    #[test]
    fn dmdc_zero_input_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a_true = stable_matrix(4, 0.9, &mut rng);
        let b_true = DMatrix::zeros(4, 2);
        // inputs drive nothing, but the state needs its own excitation
        let (mut states, inputs) = simulate(&a_true, &b_true, 300, &mut rng);
        let kicks = random_matrix(4, 301, &mut rng);
        for k in 0..300 {
            let next = &a_true * states.column(k) + kicks.column(k);
            states.set_column(k + 1, &next);
        }
        // the kicks act as unmodelled inputs; add them back as known forcing
        let x_next_clean = DMatrix::from_fn(4, 300, |i, k| states[(i, k + 1)] - kicks[(i, k)]);
        let snaps = SnapshotMatrices {
            x: states.columns(0, 300).into_owned(),
            x_next: x_next_clean,
            inputs: inputs.columns(0, 300).into_owned(),
        };
        let (a, b) = dmdc_operators(&snaps, RankPolicy::Full).unwrap();
        assert!(b.norm() < 1e-6, "{}", b.norm());
        assert!((&a - &a_true).norm() / a_true.norm() < 1e-8);
    }

    #[test]
    fn dmdc_degenerate() {
        let snaps = SnapshotMatrices { x: DMatrix::zeros(2, 5), x_next: DMatrix::zeros(2, 5), inputs: DMatrix::zeros(1, 5) };
        assert!(matches!(dmdc_operators(&snaps, RankPolicy::Full), Err(Error::Degenerate(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn dmdc_exact_recovery(n in 1usize..5, p in 1usize..3, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a_true = stable_matrix(n, 0.9, &mut rng);
            let b_true = random_matrix(n, p, &mut rng);
            let steps = 10 * (n + p) + 10;
            let (states, inputs) = simulate(&a_true, &b_true, steps, &mut rng);
            let snaps = snapshot_matrices(&states, &inputs).unwrap();
            let (a, b) = dmdc_operators(&snaps, RankPolicy::Full).unwrap();
            prop_assert!((&a - &a_true).norm() / a_true.norm() < 1e-8);
            prop_assert!((&b - &b_true).norm() / b_true.norm() < 1e-8);
        }
    }

    #[test]
    fn eig_diagonal() {
        let ev = eigenvalues(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).unwrap();
        assert_relative_eq!(ev[0].re, 3.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1].re, 2.0, epsilon = 1e-14);
        assert!(ev.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn eig_rotation() {
        let th: f64 = 0.1;
        let r = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let ev = eigenvalues(&r).unwrap();
        assert_eq!(ev[0], ev[1].conj());
        assert!(ev[0].im > 0.0);
        for z in &ev {
            assert!((z.norm() - 1.0).abs() < 1e-10);
            assert!((z.im.abs() - 0.1f64.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_non_square() {
        assert!(eigenvalues(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn eig_conjugate_symmetric_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = random_matrix(7, 7, &mut rng);
        let ev = eigenvalues(&m).unwrap();
        assert_eq!(ev.len(), 7);
        for z in ev.iter().filter(|z| z.im != 0.0) {
            assert!(ev.iter().any(|w| *w == z.conj()));
        }
        assert!(ev.windows(2).all(|w| w[0].norm() >= w[1].norm()));
    }

    #[test]
    fn delay_dmd_sinusoid() {
        let omega = 0.7;
        let dt = 0.1;
        let x: Vec<f64> = (0..400).map(|k| (omega * k as f64 * dt + 0.3).sin()).collect();
        let emb = delay_embed(&x, DelayConfig::new(1, 1).unwrap()).unwrap();
        let snaps = snapshot_matrices(&emb, &DMatrix::zeros(0, emb.ncols())).unwrap();
        let a = dmd_fit(&snaps).unwrap();
        let ev = eigenvalues(&a).unwrap();
        let target = Complex64::from_polar(1.0, omega * dt);
        assert!((ev[0] - target).norm() < 1e-6, "{}", ev[0]);
        assert!((ev[1] - target.conj()).norm() < 1e-6);
    }
}
