//! Exact counting: equations, variables, properness, the time-extension
//! DoF series and channel-space dimensions.
//!
//! Everything here is big-integer or big-rational arithmetic. The
//! time-extension dimensions grow like `(n+1)^N` with `N` quadratic in the
//! user count, so nothing fits a machine word for long.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::SystemConfig;

fn big(x: usize) -> BigInt {
    BigInt::from(x)
}

/// `sum_{k != l} d_k d_l`, computed as `(sum d)^2 - sum d^2`.
pub fn equation_count_exact(streams: &[BigInt]) -> BigInt {
    let total: BigInt = streams.iter().sum();
    let squares: BigInt = streams.iter().map(|d| d * d).sum();
    &total * &total - squares
}

/// Number of scalar equations in the zero-forcing conditions.
pub fn equation_count(streams: &[usize]) -> BigInt {
    equation_count_exact(&streams.iter().copied().map(big).collect::<Vec<_>>())
}

/// `2 sum_k (N_k d_k - d_k^2)`.
pub fn variable_count_exact(signal_dims: &[BigInt], streams: &[BigInt]) -> BigInt {
    let inner: BigInt = signal_dims.iter().zip(streams).map(|(n, d)| n * d - d * d).sum();
    inner * 2
}

/// Free variables left after fixing the gauge.
pub fn variable_count(cfg: &SystemConfig) -> BigInt {
    let n: Vec<BigInt> = cfg.signal_dims.iter().copied().map(big).collect();
    let d: Vec<BigInt> = cfg.streams.iter().copied().map(big).collect();
    variable_count_exact(&n, &d)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropernessReport {
    #[serde(rename = "N_e", serialize_with = "as_decimal")]
    pub equations: BigInt,
    #[serde(rename = "N_v", serialize_with = "as_decimal")]
    pub variables: BigInt,
    pub proper: bool,
    /// `N_v - N_e`.
    #[serde(serialize_with = "as_decimal")]
    pub slack: BigInt,
}

impl PropernessReport {
    pub fn from_counts(equations: BigInt, variables: BigInt) -> Self {
        let slack = &variables - &equations;
        Self {
            proper: !slack.is_negative(),
            equations,
            variables,
            slack,
        }
    }
}

pub fn properness_exact(signal_dims: &[BigInt], streams: &[BigInt]) -> PropernessReport {
    PropernessReport::from_counts(equation_count_exact(streams), variable_count_exact(signal_dims, streams))
}

/// Properness `N_e <= N_v` for a configuration.
pub fn is_proper(cfg: &SystemConfig) -> PropernessReport {
    PropernessReport::from_counts(equation_count(&cfg.streams), variable_count(cfg))
}

/// Per-user DoF bound `2M / (K + 1)` for symmetric MIMO.
pub fn symmetric_bound(antennas: u64, users: u64) -> BigRational {
    BigRational::new(BigInt::from(2 * antennas), BigInt::from(users + 1))
}

/// `1 / K`: per-user share under plain time division.
pub fn tdma_baseline(users: u64) -> Result<BigRational> {
    if users == 0 {
        return Err(Error::InvalidParameter("TDMA baseline needs K >= 1".into()));
    }
    Ok(BigRational::new(BigInt::one(), BigInt::from(users)))
}

/// Parameters of the time-extension alignment scheme for `K` users.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CjParameters {
    #[serde(rename = "K")]
    pub users: usize,
    pub n: u64,
    /// `N = (K-1)(K-2) - 1`.
    #[serde(rename = "N_exp")]
    pub exponent: u32,
    /// `N_s = (n+1)^N + n^N`.
    #[serde(rename = "N_s", serialize_with = "as_decimal")]
    pub signal_dim: BigInt,
    /// `d_1 = (n+1)^N`, `d_k = n^N` otherwise.
    #[serde(rename = "d", serialize_with = "as_decimal_vec")]
    pub streams: Vec<BigInt>,
    #[serde(rename = "d_total", serialize_with = "as_decimal")]
    pub total: BigInt,
    /// `d_total / (K N_s)`.
    #[serde(rename = "d_bar", serialize_with = "as_fraction")]
    pub normalized: BigRational,
}

fn cj_exponent(users: usize) -> Result<u32> {
    if users < 3 {
        return Err(Error::InvalidParameter(format!("time-extension scheme needs K >= 3, got {users}")));
    }
    let n = (users - 1) * (users - 2) - 1;
    u32::try_from(n).map_err(|_| Error::InvalidParameter(format!("K = {users} is too large")))
}

/// `(d_1, d_other, N_s)` without building the rational.
fn cj_dims(exponent: u32, n: u64) -> (BigInt, BigInt, BigInt) {
    let a: BigInt = Pow::pow(BigInt::from(n + 1), exponent);
    let b: BigInt = Pow::pow(BigInt::from(n), exponent);
    let ns = &a + &b;
    (a, b, ns)
}

pub fn cj_parameters(users: usize, n: u64) -> Result<CjParameters> {
    let exponent = cj_exponent(users)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be a positive integer".into()));
    }
    let (a, b, ns) = cj_dims(exponent, n);
    let mut streams = vec![b.clone(); users];
    streams[0] = a.clone();
    let total = &a + &b * big(users - 1);
    let normalized = BigRational::new(total.clone(), &ns * big(users));
    Ok(CjParameters {
        users,
        n,
        exponent,
        signal_dim: ns,
        streams,
        total,
        normalized,
    })
}

impl CjParameters {
    /// Properness of the scheme's own configuration (`N_k = N_s` for all k).
    pub fn properness(&self) -> PropernessReport {
        let dims = vec![self.signal_dim.clone(); self.users];
        properness_exact(&dims, &self.streams)
    }
}

/// Closed form of improperness for the time-extension configuration:
/// `(K-1)(K-2) n^N > 2 (n+1)^N`.
pub fn improper_by_threshold(users: usize, n: u64) -> Result<bool> {
    let exponent = cj_exponent(users)?;
    let (a, b, _) = cj_dims(exponent, n);
    Ok(b * big((users - 1) * (users - 2)) > a * 2)
}

/// Smallest `n <= n_max` whose time-extension configuration is improper.
///
/// Sweeps `n = 1, 2, ...` evaluating the full equation and variable counts
/// in big integers.
pub fn min_improper_n(users: usize, n_max: u64) -> Result<Option<u64>> {
    let exponent = cj_exponent(users)?;
    for n in 1..=n_max {
        let (a, b, ns) = cj_dims(exponent, n);
        let mut streams = vec![b; users];
        streams[0] = a;
        let dims = vec![ns; users];
        if !properness_exact(&dims, &streams).proper {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Dimension of the free cross-channel space.
pub fn dim_channel_space(cfg: &SystemConfig) -> BigInt {
    big(cfg.free_entry_count(false))
}

/// `N_e - dim(free cross-channel space)`; positive means the linear system
/// in the channel entries is overdetermined for every choice of beams.
pub fn sparse_dim_deficit(cfg: &SystemConfig) -> BigInt {
    equation_count(&cfg.streams) - dim_channel_space(cfg)
}

/// JSON record `{config, N_e, N_v, proper, dim_H, deficit}`.
#[derive(Clone, Debug, Serialize)]
pub struct CountingRecord {
    pub config: SystemConfig,
    #[serde(rename = "N_e", serialize_with = "as_decimal")]
    pub equations: BigInt,
    #[serde(rename = "N_v", serialize_with = "as_decimal")]
    pub variables: BigInt,
    pub proper: bool,
    #[serde(rename = "dim_H", serialize_with = "as_decimal")]
    pub dim_channel_space: BigInt,
    #[serde(serialize_with = "as_decimal")]
    pub deficit: BigInt,
}

impl CountingRecord {
    pub fn for_config(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let report = is_proper(cfg);
        Ok(Self {
            config: cfg.clone(),
            equations: report.equations,
            variables: report.variables,
            proper: report.proper,
            dim_channel_space: dim_channel_space(cfg),
            deficit: sparse_dim_deficit(cfg),
        })
    }
}

/// `p/q` rendering (`p` alone for integers).
pub fn fraction_string(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Nearest `f64` of an exact rational (zero/inf handled by `to_f64`).
pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn as_decimal<S: Serializer>(x: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn as_decimal_vec<S: Serializer>(xs: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|x| x.to_string()))
}

fn as_fraction<S: Serializer>(x: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fraction_string(x))
}
