//! Uplink SNR and SINR under maximal-ratio and optimum combining.
//!
//! Optimum combining maximizes the generalized Rayleigh quotient
//!
//! ```text
//!   SINR_k(v) = p |v^H h_k|^2 / v^H (p sum_{i != k} h_i h_i^H + s2 I) v
//! ```
//!
//! whose maximizer is `v = (p sum_{i != k} h_i h_i^H + s2 I)^{-1} h_k` and
//! whose maximum is `p h_k^H (...)^{-1} h_k`. The inverse is never formed;
//! the combiner comes from a Hermitian positive-definite solve.

use crate::channel::linear_to_db;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sqr, Cholesky, SquareMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// UE transmit power and per-AP uplink noise power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    pub p_dbm: f64,
    pub noise_dbm: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            p_dbm: 0.0,
            noise_dbm: -90.0,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !self.p_dbm.is_finite() || !self.noise_dbm.is_finite() {
            return Err(Error::InvalidInput("link budget must be finite".into()));
        }
        if self.noise_dbm >= self.p_dbm + 200.0 {
            return Err(Error::InvalidInput("noise power is implausibly high".into()));
        }
        Ok(())
    }

    /// Transmit power, mW.
    pub fn power_mw(&self) -> f64 {
        10f64.powf(self.p_dbm / 10.0)
    }

    /// Noise power, mW.
    pub fn noise_mw(&self) -> f64 {
        10f64.powf(self.noise_dbm / 10.0)
    }

    /// `p / s2`, linear.
    pub fn snr_scale(&self) -> f64 {
        10f64.powf((self.p_dbm - self.noise_dbm) / 10.0)
    }
}

/// A power ratio in both scales.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratio {
    pub linear: f64,
    pub db: f64,
}

impl Ratio {
    pub fn from_linear(linear: f64) -> Self {
        Ratio {
            linear,
            db: linear_to_db(linear),
        }
    }
}

/// Single-user uplink SNR with MR combining over the given per-AP average
/// gains: `(p / s2) * sum_l gain_l`.
pub fn uplink_snr(gains: &[f64], budget: &LinkBudget) -> Result<Ratio> {
    if gains.is_empty() {
        return Err(Error::InvalidInput("no AP gains given".into()));
    }
    if gains.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(Error::InvalidInput("gains must be finite and nonnegative".into()));
    }
    let total: f64 = gains.iter().sum();
    Ok(Ratio::from_linear(budget.snr_scale() * total))
}

/// M x K channel matrix for one frequency realization, stored by column.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix {
    m: usize,
    k: usize,
    columns: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let k = columns.len();
        let m = columns.first().map_or(0, Vec::len);
        if m == 0 || k == 0 {
            return Err(Error::InvalidInput("channel matrix needs M >= 1 and K >= 1".into()));
        }
        if columns.iter().any(|c| c.len() != m) {
            return Err(Error::InvalidInput("columns have different lengths".into()));
        }
        let data: Vec<Complex64> = columns.iter().flatten().copied().collect();
        if data.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidInput("channel matrix has non-finite entries".into()));
        }
        Ok(ChannelMatrix { m, k, columns: data })
    }

    pub fn n_aps(&self) -> usize {
        self.m
    }

    pub fn n_ues(&self) -> usize {
        self.k
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        &self.columns[k * self.m..(k + 1) * self.m]
    }

    /// Every column except `k`.
    pub fn interferers(&self, k: usize) -> Vec<&[Complex64]> {
        (0..self.k).filter(|&i| i != k).map(|i| self.column(i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombiningMethod {
    Optimum,
    Mr,
}

impl fmt::Display for CombiningMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombiningMethod::Optimum => "optimum",
            CombiningMethod::Mr => "mr",
        })
    }
}

impl std::str::FromStr for CombiningMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "optimum" => Ok(CombiningMethod::Optimum),
            "mr" => Ok(CombiningMethod::Mr),
            other => Err(Error::InvalidInput(format!("unknown combining method '{other}'"))),
        }
    }
}

/// Which linear solve backs [`optimum_vector`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveRoute {
    /// Cholesky of the full M x M interference-plus-noise matrix.
    Full,
    /// Matrix-inversion-lemma form with a (K-1) x (K-1) Cholesky; cheaper
    /// when there are fewer interferers than APs.
    LowRank,
    /// `LowRank` when `K - 1 < M`, else `Full`.
    Auto,
}

fn check_finite(v: &[Complex64], what: &str) -> Result<()> {
    if v.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::InvalidInput(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn is_zero(v: &[Complex64]) -> bool {
    v.iter().all(|c| c.re == 0.0 && c.im == 0.0)
}

/// MR combiner, `v = h`.
pub fn mr_vector(h: &[Complex64]) -> Result<Vec<Complex64>> {
    if h.is_empty() || is_zero(h) {
        return Err(Error::DegenerateChannel("MR combiner of a zero channel".into()));
    }
    check_finite(h, "channel")?;
    Ok(h.to_vec())
}

/// `p sum_i h_i h_i^H + s2 I`.
pub fn interference_plus_noise(m: usize, interferers: &[&[Complex64]], budget: &LinkBudget) -> SquareMatrix {
    let mut r = SquareMatrix::scaled_identity(m, budget.noise_mw());
    let p = budget.power_mw();
    for h in interferers {
        r.add_outer(h, p);
    }
    r
}

fn validate_inputs(h: &[Complex64], interferers: &[&[Complex64]]) -> Result<()> {
    if h.is_empty() {
        return Err(Error::InvalidInput("empty channel vector".into()));
    }
    check_finite(h, "channel")?;
    for (i, g) in interferers.iter().enumerate() {
        if g.len() != h.len() {
            return Err(Error::InvalidInput(format!("interferer {i} has wrong length")));
        }
        check_finite(g, "interferer")?;
    }
    Ok(())
}

/// Optimum (interference-aware) combiner for the UE with channel `h`.
///
/// Any nonzero complex multiple of the returned vector is equally optimal.
pub fn optimum_vector(h: &[Complex64], interferers: &[&[Complex64]], budget: &LinkBudget) -> Result<Vec<Complex64>> {
    optimum_vector_with(h, interferers, budget, SolveRoute::Auto)
}

pub fn optimum_vector_with(
    h: &[Complex64],
    interferers: &[&[Complex64]],
    budget: &LinkBudget,
    route: SolveRoute,
) -> Result<Vec<Complex64>> {
    validate_inputs(h, interferers)?;
    if is_zero(h) {
        return Err(Error::DegenerateChannel("optimum combiner of a zero channel".into()));
    }
    let m = h.len();
    let route = match route {
        SolveRoute::Auto if interferers.len() < m => SolveRoute::LowRank,
        SolveRoute::Auto => SolveRoute::Full,
        r => r,
    };
    // Work with channels normalized by sqrt(p / s2) so the system is
    // I + G G^H. This rescales v by a positive constant only.
    let scale = budget.snr_scale().sqrt();
    let g_k: Vec<Complex64> = h.iter().map(|c| c * scale).collect();
    let g_int: Vec<Vec<Complex64>> = interferers
        .iter()
        .map(|col| col.iter().map(|c| c * scale).collect())
        .collect();

    match route {
        SolveRoute::Full | SolveRoute::Auto => {
            let mut a = SquareMatrix::scaled_identity(m, 1.0);
            for g in &g_int {
                a.add_outer(g, 1.0);
            }
            Ok(Cholesky::factor(&a)?.solve(&g_k))
        }
        SolveRoute::LowRank => {
            // (I + G G^H)^{-1} g = g - G (I + G^H G)^{-1} G^H g
            let r = g_int.len();
            if r == 0 {
                return Ok(g_k);
            }
            let mut gram = SquareMatrix::scaled_identity(r, 1.0);
            for i in 0..r {
                for j in 0..=i {
                    let v = dot(&g_int[i], &g_int[j]);
                    gram[(i, j)] += v;
                    if i != j {
                        gram[(j, i)] += v.conj();
                    }
                }
            }
            let proj: Vec<Complex64> = g_int.iter().map(|g| dot(g, &g_k)).collect();
            let coef = Cholesky::factor(&gram)?.solve(&proj);
            let mut v = g_k;
            for (g, c) in g_int.iter().zip(&coef) {
                for (vi, gi) in v.iter_mut().zip(g) {
                    *vi -= gi * c;
                }
            }
            Ok(v)
        }
    }
}

/// SINR of UE `h` with combiner `v`.
pub fn sinr(v: &[Complex64], h: &[Complex64], interferers: &[&[Complex64]], budget: &LinkBudget) -> Result<Ratio> {
    validate_inputs(h, interferers)?;
    if v.len() != h.len() {
        return Err(Error::InvalidCombiner("combiner length differs from channel".into()));
    }
    check_finite(v, "combiner")?;
    if is_zero(v) {
        return Err(Error::InvalidCombiner("zero combining vector".into()));
    }
    let p = budget.power_mw();
    let signal = p * dot(v, h).norm_sqr();
    let interference: f64 = interferers.iter().map(|g| dot(v, g).norm_sqr()).sum::<f64>() * p;
    let noise = budget.noise_mw() * norm_sqr(v);
    Ok(Ratio::from_linear(signal / (interference + noise)))
}

/// Closed-form maximum SINR, `p h^H (p sum h_i h_i^H + s2 I)^{-1} h`,
/// from a full Cholesky solve of the unnormalized system.
pub fn optimum_sinr_bound(h: &[Complex64], interferers: &[&[Complex64]], budget: &LinkBudget) -> Result<Ratio> {
    validate_inputs(h, interferers)?;
    let r = interference_plus_noise(h.len(), interferers, budget);
    let x = Cholesky::factor(&r)?.solve(h);
    Ok(Ratio::from_linear(budget.power_mw() * dot(h, &x).re))
}

/// SINR of UE `k` in `matrix` under the chosen combiner. A UE whose channel
/// is zero on every AP receives nothing and gets SINR 0.
pub fn ue_sinr(matrix: &ChannelMatrix, k: usize, method: CombiningMethod, budget: &LinkBudget) -> Result<Ratio> {
    let h = matrix.column(k);
    if is_zero(h) {
        return Ok(Ratio::from_linear(0.0));
    }
    let interferers = matrix.interferers(k);
    let v = match method {
        CombiningMethod::Mr => mr_vector(h)?,
        CombiningMethod::Optimum => optimum_vector(h, &interferers, budget)?,
    };
    sinr(&v, h, &interferers, budget)
}
