//! Stabilizer mixed states under random Pauli measurements.
//!
//! A state on `n` qubits is described by `k` independent, pairwise commuting
//! Pauli strings; its entropy is `n − k` bits. Phases never affect the entropy,
//! so strings are stored as bare X/Z bit masks.
//!
//! Conjugating a fixed Pauli by a uniformly random Clifford gives a uniformly
//! random non-identity Pauli, so "random Clifford then fixed measurement" is
//! simulated by drawing the measured Pauli directly.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::moments::McEstimate;
use crate::{parallel, Error, Result, RngStream};

pub const MAX_QUBITS: usize = 64;

/// A Pauli string up to phase: bit `q` of `x` (`z`) marks an X (Z) factor on qubit `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidDimension(format!("qubit count must be in 1..={MAX_QUBITS}, got {n}")));
    }
    Ok(())
}

impl PauliString {
    pub fn new(n: usize, x: u64, z: u64) -> Result<Self> {
        check_qubits(n)?;
        if (x | z) & !mask(n) != 0 {
            return Err(Error::InvalidDimension(format!("bits set beyond qubit {n}")));
        }
        Ok(Self { n, x, z })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, 0, 0)
    }

    /// A single-qubit Pauli on `qubit`.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Result<Self> {
        if qubit >= n {
            return Err(Error::InvalidDimension(format!("qubit {qubit} out of range for n = {n}")));
        }
        let b = 1u64 << qubit;
        match p {
            Pauli::X => Self::new(n, b, 0),
            Pauli::Y => Self::new(n, b, b),
            Pauli::Z => Self::new(n, 0, b),
        }
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Product up to phase.
    pub fn mul(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        }
    }

    fn packed(&self) -> u128 {
        self.x as u128 | ((self.z as u128) << 64)
    }

    fn anticommutes(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) & 1 == 1
    }

    pub fn random(n: usize, sampling: Sampling, rng: &mut RngStream) -> Self {
        let m = mask(n);
        loop {
            let x = rng.next_u64() & m;
            let z = rng.next_u64() & m;
            if sampling == Sampling::UniformAllPaulis || (x | z) != 0 {
                return Self { n, x, z };
            }
        }
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for q in 0..self.n {
            let c = match ((self.x >> q) & 1, (self.z >> q) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (1, 1) => 'Y',
                _ => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// 1 if `p` and `q` anticommute, 0 if they commute.
pub fn symplectic_product(p: &PauliString, q: &PauliString) -> Result<u8> {
    if p.n != q.n {
        return Err(Error::DimensionMismatch(format!("{} vs {} qubits", p.n, q.n)));
    }
    Ok(p.anticommutes(q) as u8)
}

/// Rank over GF(2) of packed 2n-bit vectors.
fn gf2_rank(vectors: impl IntoIterator<Item = u128>) -> usize {
    let mut basis: Vec<u128> = Vec::new();
    for mut v in vectors {
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizerTableau {
    n: usize,
    rows: Vec<PauliString>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementCase {
    /// Commuting and independent: one more stabilizer.
    Added,
    /// Anticommutes with some row: one stabilizer traded for the measured one.
    Replaced,
    /// Already in the stabilizer group.
    Redundant,
    Identity,
}

impl MeasurementCase {
    pub fn name(&self) -> &'static str {
        match self {
            MeasurementCase::Added => "added",
            MeasurementCase::Replaced => "replaced",
            MeasurementCase::Redundant => "redundant",
            MeasurementCase::Identity => "identity",
        }
    }
}

impl StabilizerTableau {
    /// The maximally mixed state: no stabilizers.
    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubits(n)?;
        Ok(Self { n, rows: Vec::new() })
    }

    pub fn new(n: usize, rows: Vec<PauliString>) -> Result<Self> {
        check_qubits(n)?;
        if let Some(r) = rows.iter().find(|r| r.n != n) {
            return Err(Error::DimensionMismatch(format!("row on {} qubits in an {n}-qubit tableau", r.n)));
        }
        let t = Self { n, rows };
        t.validate()?;
        Ok(t)
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[PauliString] {
        &self.rows
    }

    /// Independence via GF(2) rank and pairwise commutation.
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() > self.n {
            return Err(Error::InvalidState(format!("{} stabilizers on {} qubits", self.rows.len(), self.n)));
        }
        if gf2_rank(self.rows.iter().map(PauliString::packed)) != self.rows.len() {
            return Err(Error::InvalidState("stabilizers are linearly dependent".into()));
        }
        for (i, a) in self.rows.iter().enumerate() {
            if let Some(j) = self.rows[i + 1..].iter().position(|b| a.anticommutes(b)) {
                return Err(Error::InvalidState(format!("rows {i} and {} anticommute", i + 1 + j)));
            }
        }
        Ok(())
    }

    pub fn in_span(&self, p: &PauliString) -> bool {
        let k = self.rows.len();
        gf2_rank(self.rows.iter().map(PauliString::packed).chain([p.packed()])) == k
    }

    /// Measure `p`, updating the tableau in place.
    pub fn measure(&mut self, p: &PauliString) -> MeasurementCase {
        debug_assert_eq!(p.n, self.n);
        if p.is_identity() {
            return MeasurementCase::Identity;
        }
        match self.rows.iter().position(|r| r.anticommutes(p)) {
            Some(pivot) => {
                let pv = self.rows[pivot];
                for r in self.rows[pivot + 1..].iter_mut() {
                    if r.anticommutes(p) {
                        *r = r.mul(&pv);
                    }
                }
                self.rows[pivot] = *p;
                MeasurementCase::Replaced
            }
            None if self.in_span(p) => MeasurementCase::Redundant,
            None => {
                self.rows.push(*p);
                MeasurementCase::Added
            }
        }
    }

    pub fn entropy_bits(&self) -> usize {
        self.n - self.rows.len()
    }
}

/// Measure `p` on a copy of `tab`.
pub fn measure_pauli(tab: &StabilizerTableau, p: &PauliString) -> Result<(StabilizerTableau, MeasurementCase)> {
    if p.n != tab.n {
        return Err(Error::DimensionMismatch(format!("{}-qubit Pauli on {}-qubit tableau", p.n, tab.n)));
    }
    let mut out = tab.clone();
    let case = out.measure(p);
    Ok((out, case))
}

pub fn entropy_bits(tab: &StabilizerTableau) -> usize {
    tab.entropy_bits()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Uniform over all 4ⁿ strings, identity included.
    #[default]
    UniformAllPaulis,
    UniformNonidentity,
}

/// Probability that a uniform Pauli (identity included) adds a stabilizer at rank `k`.
pub fn added_probability(n: usize, k: usize) -> f64 {
    0.5f64.powi(k as i32) * (1.0 - 0.25f64.powi((n - k) as i32))
}

/// Expected steps from maximally mixed to pure under uniform sampling over all Paulis.
pub fn expected_steps_to_pure(n: usize) -> f64 {
    (0..n).map(|k| 1.0 / added_probability(n, k)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizerOptions {
    pub qubits: usize,
    /// Measurement budget per trajectory.
    pub steps: usize,
    #[serde(default)]
    pub sampling: Sampling,
    pub seed: u64,
    /// End a trajectory as soon as it is pure.
    #[serde(default = "yes")]
    pub stop_when_pure: bool,
}

fn yes() -> bool {
    true
}

impl StabilizerOptions {
    pub fn new(qubits: usize, steps: usize, seed: u64) -> Self {
        Self {
            qubits,
            steps,
            sampling: Sampling::UniformAllPaulis,
            seed,
            stop_when_pure: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizerRow {
    pub step: usize,
    pub entropy_bits: usize,
    pub case: MeasurementCase,
}

/// Visits and `added` outcomes per rank.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub visits: Vec<u64>,
    pub added: Vec<u64>,
}

impl CaseCounts {
    fn new(n: usize) -> Self {
        Self {
            visits: vec![0; n + 1],
            added: vec![0; n + 1],
        }
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.visits.iter_mut().zip(&other.visits) {
            *a += b;
        }
        for (a, b) in self.added.iter_mut().zip(&other.added) {
            *a += b;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizerRecord {
    pub qubits: usize,
    pub rows: Vec<StabilizerRow>,
    pub counts: CaseCounts,
    pub steps_to_pure: Option<usize>,
}

impl StabilizerRecord {
    pub fn csv_header() -> &'static str {
        "step,entropy_bits,case"
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::csv_header());
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.step, r.entropy_bits, r.case.name()));
        }
        s
    }

    /// Every step lowers the entropy by exactly 0 or 1 bit.
    pub fn is_monotone(&self) -> bool {
        let mut prev = self.qubits;
        self.rows.iter().all(|r| {
            let ok = r.entropy_bits <= prev && prev - r.entropy_bits <= 1;
            prev = r.entropy_bits;
            ok
        })
    }
}

fn trajectory(opts: &StabilizerOptions, rng: &mut RngStream, keep_rows: bool) -> Result<StabilizerRecord> {
    let n = opts.qubits;
    let mut tab = StabilizerTableau::maximally_mixed(n)?;
    let mut counts = CaseCounts::new(n);
    let mut rows = Vec::new();
    let mut steps_to_pure = None;
    for step in 1..=opts.steps {
        let k = tab.rank();
        let p = PauliString::random(n, opts.sampling, rng);
        let case = tab.measure(&p);
        counts.visits[k] += 1;
        if case == MeasurementCase::Added {
            counts.added[k] += 1;
        }
        if keep_rows {
            rows.push(StabilizerRow {
                step,
                entropy_bits: tab.entropy_bits(),
                case,
            });
        }
        if tab.rank() == n && steps_to_pure.is_none() {
            steps_to_pure = Some(step);
            if opts.stop_when_pure {
                break;
            }
        }
    }
    Ok(StabilizerRecord {
        qubits: n,
        rows,
        counts,
        steps_to_pure,
    })
}

/// One trajectory from the maximally mixed state, drawing from stream `(seed, 0)`.
pub fn run_purification(opts: &StabilizerOptions) -> Result<StabilizerRecord> {
    check_qubits(opts.qubits)?;
    trajectory(opts, &mut RngStream::new(opts.seed, 0), true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddedRateRow {
    pub k: usize,
    pub visits: u64,
    pub added: u64,
    pub frequency: f64,
    pub expected: f64,
    /// Binomial standard error at the expected rate.
    pub standard_error: f64,
}

impl AddedRateRow {
    pub fn agrees(&self, k_sigma: f64) -> bool {
        (self.frequency - self.expected).abs() <= k_sigma * self.standard_error
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub options: StabilizerOptions,
    pub trajectories: usize,
    pub rates: Vec<AddedRateRow>,
    /// Over trajectories that purified within the budget.
    pub steps_to_pure: Option<McEstimate>,
    pub unpurified: usize,
    pub monotone_violations: usize,
    pub expected_steps_to_pure: f64,
}

impl EnsembleReport {
    /// Rows visited at least `min_visits` times all agree within `k_sigma` stderr.
    pub fn rates_agree(&self, min_visits: u64, k_sigma: f64) -> bool {
        self.rates.iter().filter(|r| r.visits >= min_visits).all(|r| r.agrees(k_sigma))
    }
}

/// `trajectories` independent runs; trajectory `t` draws from `RngStream::new(seed, 0).derive(t)`.
pub fn run_ensemble(opts: &StabilizerOptions, trajectories: usize, workers: usize) -> Result<EnsembleReport> {
    check_qubits(opts.qubits)?;
    if trajectories < 2 {
        return Err(Error::InvalidDimension(format!("need at least 2 trajectories, got {trajectories}")));
    }
    let n = opts.qubits;
    let base = RngStream::new(opts.seed, 0);
    let records = parallel::map_indexed(trajectories, workers, |t| {
        let mut rng = base.derive(t as u64);
        let mut rec = trajectory(opts, &mut rng, true)?;
        let monotone = rec.is_monotone();
        rec.rows = Vec::new();
        Ok((rec, monotone))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut counts = CaseCounts::new(n);
    let mut times = Vec::new();
    let mut monotone_violations = 0;
    for (rec, monotone) in &records {
        counts.merge(&rec.counts);
        times.extend(rec.steps_to_pure.map(|s| s as f64));
        monotone_violations += usize::from(!monotone);
    }
    let rates = (0..=n)
        .filter(|&k| counts.visits[k] > 0)
        .map(|k| {
            let expected = match opts.sampling {
                Sampling::UniformAllPaulis => added_probability(n, k),
                Sampling::UniformNonidentity => added_probability_nonidentity(n, k),
            };
            let visits = counts.visits[k];
            AddedRateRow {
                k,
                visits,
                added: counts.added[k],
                frequency: counts.added[k] as f64 / visits as f64,
                expected,
                standard_error: (expected * (1.0 - expected) / visits as f64).sqrt(),
            }
        })
        .collect();
    let unpurified = trajectories - times.len();
    Ok(EnsembleReport {
        options: opts.clone(),
        trajectories,
        rates,
        steps_to_pure: McEstimate::from_samples(&times).ok(),
        unpurified,
        monotone_violations,
        expected_steps_to_pure: expected_steps_to_pure(n),
    })
}

/// Added probability when the identity is excluded from sampling.
pub fn added_probability_nonidentity(n: usize, k: usize) -> f64 {
    let total = 4f64.powi(n as i32);
    let addable = total * added_probability(n, k);
    addable / (total - 1.0)
}

/// Base `b` of the least-squares fit `T ≈ a·bⁿ` through `(n, T)` points.
pub fn exponential_base(points: &[(usize, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidDimension("need at least two points for a fit".into()));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 as f64 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    Ok((sxy / sxx).exp())
}
