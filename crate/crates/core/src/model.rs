//! Problem instances: sparse ground-truth signals, Gaussian measurements
//! and the distance modulo global sign.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::{dot, norm2};
use crate::error::{check_len, Error, Result};

/// Rejection attempts when a fixed-max remainder overshoots the fixed maximum.
const MAX_REMAINDER_DRAWS: usize = 10_000;

/// A k-sparse ground-truth vector `x*`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    values: Vec<f64>,
    support: Vec<usize>,
    norm: f64,
}

impl SparseSignal {
    /// Builds a signal from its dense values. The support is the set of
    /// nonzero coordinates; an all-zero vector is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("signal contains non-finite values"));
        }
        let support: Vec<usize> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        if support.is_empty() {
            return Err(Error::param("signal must have at least one nonzero entry"));
        }
        let norm = norm2(&values);
        Ok(SparseSignal {
            values,
            support,
            norm,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sorted indices of the nonzero coordinates.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `max_i |x_i*| / ‖x*‖`.
    pub fn x_max(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) / self.norm
    }

    /// `min_{i ∈ S} |x_i*| / ‖x*‖`.
    pub fn x_min(&self) -> f64 {
        self.support
            .iter()
            .map(|&i| self.values[i].abs())
            .fold(f64::INFINITY, f64::min)
            / self.norm
    }

    /// The sign-flipped signal `−x*`, indistinguishable from `x*` by the measurements.
    pub fn negated(&self) -> SparseSignal {
        SparseSignal {
            values: self.values.iter().map(|v| -v).collect(),
            support: self.support.clone(),
            norm: self.norm,
        }
    }
}

/// The signal families used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalModel {
    /// Every support entry is `±1/√k` with independent random signs.
    FlatSigns,
    /// One support entry is fixed to the given value; the rest are Gaussian,
    /// rescaled so the whole vector has unit norm.
    FixedMax(f64),
    /// Like [`SignalModel::FixedMax`] with the maximum set to `k^(−p)`.
    FixedMaxPower(f64),
    /// Gaussian support entries, optionally normalized to unit norm.
    Gaussian { normalize: bool },
}

impl SignalModel {
    /// The fixed maximum for sparsity `k`, if this model fixes one.
    pub fn fixed_max(&self, k: usize) -> Option<f64> {
        match *self {
            SignalModel::FixedMax(v) => Some(v),
            SignalModel::FixedMaxPower(p) => Some((k as f64).powf(-p)),
            _ => None,
        }
    }
}

impl fmt::Display for SignalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalModel::FlatSigns => write!(f, "flat"),
            SignalModel::FixedMax(v) => write!(f, "max:{v}"),
            SignalModel::FixedMaxPower(p) => write!(f, "maxpow:{p}"),
            SignalModel::Gaussian { normalize: true } => write!(f, "gaussian"),
            SignalModel::Gaussian { normalize: false } => write!(f, "gaussian-raw"),
        }
    }
}

impl FromStr for SignalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::param(format!("bad number in signal model {s:?}")))
        };
        match s {
            "flat" => Ok(SignalModel::FlatSigns),
            "gaussian" => Ok(SignalModel::Gaussian { normalize: true }),
            "gaussian-raw" => Ok(SignalModel::Gaussian { normalize: false }),
            _ => {
                if let Some(v) = s.strip_prefix("max:") {
                    Ok(SignalModel::FixedMax(parse_num(v)?))
                } else if let Some(p) = s.strip_prefix("maxpow:") {
                    Ok(SignalModel::FixedMaxPower(parse_num(p)?))
                } else {
                    Err(Error::param(format!(
                        "unknown signal model {s:?} (expected flat, max:<v>, maxpow:<p>, gaussian, gaussian-raw)"
                    )))
                }
            }
        }
    }
}

fn standard_normal_nonzero<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let g: f64 = rng.sample(StandardNormal);
        if g != 0.0 {
            return g;
        }
    }
}

/// Draws a k-sparse signal of dimension `n` with a uniformly random support.
pub fn generate_signal<R: Rng + ?Sized>(
    model: SignalModel,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<SparseSignal> {
    if k == 0 || k > n {
        return Err(Error::param(format!("sparsity k={k} must satisfy 1 <= k <= n={n}")));
    }
    if let Some(x_max) = model.fixed_max(k) {
        check_fixed_max(x_max, k)?;
    }

    // `sample` returns indices in draw order; the first one is i_1.
    let drawn = index::sample(rng, n, k).into_vec();
    let mut values = vec![0.0; n];

    match model {
        SignalModel::FlatSigns => {
            let mag = 1.0 / (k as f64).sqrt();
            for &i in &drawn {
                values[i] = if rng.random::<bool>() { mag } else { -mag };
            }
        }
        SignalModel::FixedMax(_) | SignalModel::FixedMaxPower(_) => {
            let x_max = model.fixed_max(k).expect("fixed-max model");
            values[drawn[0]] = x_max;
            let rest = &drawn[1..];
            if !rest.is_empty() {
                let target = (1.0 - x_max * x_max).sqrt();
                let mut accepted = None;
                for _ in 0..MAX_REMAINDER_DRAWS {
                    let g: Vec<f64> = rest.iter().map(|_| standard_normal_nonzero(rng)).collect();
                    let scale = target / norm2(&g);
                    if g.iter().all(|v| (v * scale).abs() <= x_max) {
                        accepted = Some(g.into_iter().map(|v| v * scale).collect::<Vec<_>>());
                        break;
                    }
                }
                let remainder = accepted.ok_or_else(|| {
                    Error::param(format!(
                        "x_max={x_max} too close to 1/sqrt(k) for k={k}: remainder keeps exceeding it"
                    ))
                })?;
                for (&i, v) in rest.iter().zip(remainder) {
                    values[i] = v;
                }
            }
        }
        SignalModel::Gaussian { normalize } => {
            for &i in &drawn {
                values[i] = standard_normal_nonzero(rng);
            }
            if normalize {
                let s = 1.0 / norm2(&values);
                values.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    SparseSignal::new(values)
}

fn check_fixed_max(x_max: f64, k: usize) -> Result<()> {
    let ok = if k == 1 {
        (x_max - 1.0).abs() <= 1e-12
    } else {
        x_max >= 1.0 / (k as f64).sqrt() - 1e-12 && x_max < 1.0
    };
    if ok && x_max.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "x_max={x_max} inadmissible for k={k} (need 1/sqrt(k) <= x_max < 1, or x_max = 1 when k = 1)"
        )))
    }
}

/// Sensing matrix (row-major, one row per measurement) and the observed
/// squared magnitudes `y_j = (a_jᵀx*)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    a: Vec<f64>,
    y: Vec<f64>,
    n: usize,
}

impl MeasurementSet {
    pub fn new(a: Vec<f64>, y: Vec<f64>, n: usize) -> Result<Self> {
        let m = y.len();
        if m == 0 || n == 0 {
            return Err(Error::param("measurement set needs m >= 1 and n >= 1"));
        }
        check_len(m * n, a.len())?;
        if y.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param("observations must be finite and nonnegative"));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("sensing matrix contains non-finite values"));
        }
        Ok(MeasurementSet { a, y, n })
    }

    /// Measures `signal` with the given rows (row-major `m × n`).
    pub fn from_rows(signal: &SparseSignal, a: Vec<f64>) -> Result<Self> {
        let n = signal.n();
        if a.is_empty() || a.len() % n != 0 {
            return Err(Error::param(format!(
                "row-major matrix of length {} is not a positive multiple of n={n}",
                a.len()
            )));
        }
        let y = a
            .chunks_exact(n)
            .map(|row| {
                let z = dot(row, signal.values());
                z * z
            })
            .collect();
        MeasurementSet::new(a, y, n)
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major `m × n` sensing matrix.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.a[j * self.n..(j + 1) * self.n]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.a.chunks_exact(self.n)
    }

    /// Same sensing matrix with every observation multiplied by `c > 0`.
    pub fn with_scaled_observations(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::param("observation scale must be positive"));
        }
        MeasurementSet::new(self.a.clone(), self.y.iter().map(|v| v * c).collect(), self.n)
    }
}

/// Draws `m` i.i.d. standard Gaussian measurement vectors and observes `signal`.
pub fn generate_measurements<R: Rng + ?Sized>(
    signal: &SparseSignal,
    m: usize,
    rng: &mut R,
) -> Result<MeasurementSet> {
    if m == 0 {
        return Err(Error::param("sample count m must be at least 1"));
    }
    let a: Vec<f64> = (0..m * signal.n()).map(|_| rng.sample(StandardNormal)).collect();
    MeasurementSet::from_rows(signal, a)
}

/// `min(‖x − x*‖, ‖x + x*‖)`.
pub fn dist(x: &[f64], xstar: &SparseSignal) -> Result<f64> {
    check_len(xstar.n(), x.len())?;
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in x.iter().zip(xstar.values()) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    Ok(minus.min(plus).sqrt())
}

/// `dist(x, x*) / ‖x*‖`.
pub fn relative_error(x: &[f64], xstar: &SparseSignal) -> Result<f64> {
    if xstar.norm() == 0.0 {
        return Err(Error::param("relative error undefined for a zero signal"));
    }
    Ok(dist(x, xstar)? / xstar.norm())
}

/// A serialized problem instance, as written by `hwf gen` and read by `hwf run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub signal: Vec<f64>,
    pub support: Vec<u32>,
    /// Row-major `m × n`.
    pub a: Vec<f64>,
    pub y: Vec<f64>,
}

impl Instance {
    pub fn new(signal: &SparseSignal, meas: &MeasurementSet, seed: u64) -> Self {
        Instance {
            n: signal.n(),
            m: meas.m(),
            k: signal.k(),
            seed,
            signal: signal.values().to_vec(),
            support: signal.support().iter().map(|&i| i as u32).collect(),
            a: meas.a().to_vec(),
            y: meas.y().to_vec(),
        }
    }

    /// Validates the document and splits it into its signal and measurements.
    pub fn into_parts(self) -> Result<(SparseSignal, MeasurementSet)> {
        check_len(self.n, self.signal.len())?;
        check_len(self.m, self.y.len())?;
        let signal = SparseSignal::new(self.signal)?;
        let support: Vec<usize> = self.support.iter().map(|&i| i as usize).collect();
        if signal.k() != self.k || signal.support() != support.as_slice() {
            return Err(Error::param("instance support/k disagree with the signal values"));
        }
        let meas = MeasurementSet::new(self.a, self.y, self.n)?;
        Ok((signal, meas))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}
