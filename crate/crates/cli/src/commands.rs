use std::collections::BTreeMap;
use std::fmt::Write as _;

use clap::{Args, ValueEnum};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use hamlb::combinatorics::{
    minimal_nonnegative_n, verify_complex_identity, verify_reconstruction, verify_simple_identity, BinomTable,
    IdentityCheck, ZMethod,
};
use hamlb::game::{
    adversarial_schedule_search, local_pair, run_game, worst_case_pair, HaarUnitary, RoundSchedule, SearchConfig,
    CHAIN_TOL, NORM_TOL,
};
use hamlb::linalg::{perturbation_sweep, SweepConfig};
use hamlb::local_case::{
    covariance_bruteforce, covariance_psd_check, goodness_check, per_step_split_bound_with, random_t_family,
    sample_local_instance, sample_spike, spike_averaged_projector, SpikeEnsemble, SupportDegree, DEFAULT_FAMILY,
    GOODNESS_EXPONENT, MAX_STATE_QUBITS, SPLIT_EXPONENT,
};
use hamlb::worst_case::build_worst_instance;
use hamlb::{seeding, Complex64, GUARD};

use crate::{CliError, GIT_DESCRIBE};

const STATE_STREAM: u32 = 0x5354;
const TIMES_STREAM: u32 = 0x544d;
const SCALING_STREAM: u32 = 0x5343;

/// Dense and block evolutions drift apart by rounding growing like `t max|g|`;
/// past this product the comparison says nothing.
const DENSE_CHECK_PHASE: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// Internal consistency of the computation. Failing one means a bug or a
    /// numerical breakdown.
    Invariant,
    /// A bound or closed form under test.
    Claim,
}

impl std::fmt::Display for CheckKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CheckKind::Invariant => "invariant",
            CheckKind::Claim => "claim",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub pass: bool,
    pub detail: String,
}

pub struct Run {
    pub command: &'static str,
    pub seed: u64,
    pub params: Value,
    pub report: Map<String, Value>,
    pub checks: Vec<Check>,
    pub csv: Option<String>,
}

impl Run {
    fn new(command: &'static str, seed: u64, params: impl Serialize) -> Result<Self, CliError> {
        Ok(Self {
            command,
            seed,
            params: to_value(params)?,
            report: Map::new(),
            checks: Vec::new(),
            csv: None,
        })
    }

    fn invariant(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.check(CheckKind::Invariant, name, pass, detail);
    }

    fn claim(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.check(CheckKind::Claim, name, pass, detail);
    }

    fn check(&mut self, kind: CheckKind, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            kind,
            pass,
            detail: detail.into(),
        });
    }

    fn put(&mut self, key: &str, v: impl Serialize) -> Result<(), CliError> {
        self.report.insert(key.to_string(), to_value(v)?);
        Ok(())
    }

    fn put_all(&mut self, v: impl Serialize) -> Result<(), CliError> {
        match to_value(v)? {
            Value::Object(m) => {
                self.report.extend(m);
                Ok(())
            }
            _ => Err(CliError::Failed("report section is not an object".into())),
        }
    }

    fn all_pass(&self, kind: CheckKind) -> bool {
        self.checks.iter().filter(|c| c.kind == kind).all(|c| c.pass)
    }

    pub fn ok(&self, strict: bool) -> bool {
        self.all_pass(CheckKind::Invariant) && (!strict || self.all_pass(CheckKind::Claim))
    }

    pub fn to_json(&self, quick: bool, strict: bool) -> Result<String, CliError> {
        let mut out = Map::new();
        out.insert("git_describe".into(), json!(GIT_DESCRIBE));
        out.insert("command".into(), json!(self.command));
        out.insert("seed".into(), json!(self.seed));
        out.insert("quick".into(), json!(quick));
        out.insert("strict".into(), json!(strict));
        out.insert("params".into(), self.params.clone());
        out.insert("invariants_ok".into(), json!(self.all_pass(CheckKind::Invariant)));
        out.insert("claims_ok".into(), json!(self.all_pass(CheckKind::Claim)));
        out.insert("checks".into(), to_value(&self.checks)?);
        for (k, v) in &self.report {
            if out.insert(k.clone(), v.clone()).is_some_and(|old| &old != v) {
                return Err(CliError::Failed(format!("report key {k} clashes with the envelope")));
            }
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(out)).map_err(|e| CliError::Failed(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut s = format!("# {} seed {} ({})\n", self.command, self.seed, GIT_DESCRIBE);
        for c in &self.checks {
            let kind = c.kind.to_string();
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{kind:<9}  {:<width$}  {verdict}  {}", c.name, c.detail);
        }
        s
    }
}

fn to_value(v: impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Failed(e.to_string()))
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Failed(e.to_string()))
}

fn capped(v: usize, cap: usize, quick: bool) -> usize {
    if quick {
        v.min(cap)
    } else {
        v
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || points == 0 {
        return Err(CliError::Usage("time grid needs 0 < t-min <= t-max and t-points >= 1".into()));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi / lo).ln() / (points - 1) as f64;
    Ok((0..points).map(|j| lo * (step * j as f64).exp()).collect())
}

fn haar_state(dim: usize, seed: u64, index: u32) -> Result<Vec<Complex64>, CliError> {
    let mut rng = seeding::substream(seed, STATE_STREAM, index);
    let u = HaarUnitary::sample(dim, &mut rng)?;
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    psi[0] = Complex64::new(1.0, 0.0);
    u.apply(&mut psi);
    Ok(psi)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    ExactlyK,
    UpToK,
}

impl From<Support> for SupportDegree {
    fn from(s: Support) -> Self {
        match s {
            Support::ExactlyK => SupportDegree::ExactlyK,
            Support::UpToK => SupportDegree::UpToK,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    UniformExactlyC,
    UniformUpToC,
}

impl From<Ensemble> for SpikeEnsemble {
    fn from(e: Ensemble) -> Self {
        match e {
            Ensemble::UniformExactlyC => SpikeEnsemble::UniformExactlyC,
            Ensemble::UniformUpToC => SpikeEnsemble::UniformUpToC,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Worst,
    Local,
}

// worst-instance

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct WorstArgs {
    /// Qubits, 2..=24 (required; --quick caps it at 10).
    #[arg(long)]
    pub n: Option<usize>,
    /// Hardness exponent delta [default: 0.1].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Spike magnitude beta, at most 2^((1/2 - 3 delta) n) [default: 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct WorstParams {
    n: usize,
    delta: f64,
    beta: f64,
    seed: u64,
}

#[derive(Serialize)]
struct DistanceRow {
    t: f64,
    distance: f64,
    bound: f64,
    ratio: f64,
}

pub fn worst_instance(a: &WorstArgs, quick: bool) -> Result<Run, CliError> {
    let n = a.n.ok_or_else(|| CliError::Usage("missing --n".into()))?;
    let p = WorstParams {
        n: capped(n, 10, quick),
        delta: a.delta.unwrap_or(0.1),
        beta: a.beta.unwrap_or(1.0),
        seed: a.seed.unwrap_or(0),
    };
    let inst = build_worst_instance(p.n, p.delta, p.beta, p.seed)?;
    let sup = inst.sup_search();
    let mut run = Run::new("worst-instance", p.seed, &p)?;

    run.invariant(
        "distance within min(beta t, 2)",
        sup.trivial_violations == 0,
        format!("{} grid points over", sup.trivial_violations),
    );
    run.invariant(
        "distances finite",
        sup.distances.iter().all(|d| d.is_finite()),
        format!("{} points", sup.distances.len()),
    );
    if p.n <= 8 {
        let scale = inst.max_abs_g().max(p.beta);
        let mut worst = 0.0f64;
        for &t in sup.t_grid.iter().filter(|&&t| t * scale <= DENSE_CHECK_PHASE) {
            worst = worst.max((inst.dense_distance(t)? - inst.exact_block_distance(t)).abs());
        }
        run.invariant("block distance matches dense", worst <= 1e-9, format!("max diff {worst:.3e}"));
        run.put("dense_check_max_diff", worst)?;
    }
    run.claim(
        "sup distance within guard times bound",
        sup.within_guard,
        format!("max ratio {:.4} vs guard {}", sup.max_ratio, sup.guard),
    );

    let rows: Vec<DistanceRow> = sup
        .t_grid
        .iter()
        .zip(&sup.distances)
        .zip(&sup.ratios)
        .map(|((&t, &distance), &ratio)| DistanceRow {
            t,
            distance,
            bound: sup.bound,
            ratio,
        })
        .collect();
    run.csv = Some(to_csv(&rows)?);
    run.put_all(&sup)?;
    run.put("max_abs_g", inst.max_abs_g())?;
    run.put("certificate", inst.certificate())?;
    Ok(run)
}

// local-instance

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct LocalArgs {
    /// Qubits [default: 10; --quick caps it at 10].
    #[arg(long)]
    pub n: Option<usize>,
    /// Locality k [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Spike size c [default: 2].
    #[arg(long)]
    pub c: Option<usize>,
    /// Spike magnitude beta [default: 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Degrees carrying Gaussian coefficients [default: exactly-k].
    #[arg(long, value_enum)]
    pub support: Option<Support>,
    /// Distribution of the spike set T [default: uniform-exactly-c].
    #[arg(long, value_enum)]
    pub ensemble: Option<Ensemble>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Goodness threshold n^(e (k - c)) exponent e [default: 0.1].
    #[arg(long, allow_hyphen_values = true)]
    pub exponent: Option<f64>,
    /// Threshold exponent defining V in the split bound [default: -0.1].
    #[arg(long, allow_hyphen_values = true)]
    pub split_exponent: Option<f64>,
    /// Spike sets in the covariance check [default: 128; --quick caps it at 32].
    #[arg(long)]
    pub family_size: Option<usize>,
    /// Evolution times of the split-bound steps, comma separated [default: 0.1,1,10,100].
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct LocalParams {
    n: usize,
    k: usize,
    c: usize,
    beta: f64,
    support: Support,
    ensemble: Ensemble,
    seed: u64,
    exponent: f64,
    split_exponent: f64,
    family_size: usize,
    times: Vec<f64>,
}

pub fn local_instance(a: &LocalArgs, quick: bool) -> Result<Run, CliError> {
    let p = LocalParams {
        n: capped(a.n.unwrap_or(10), 10, quick),
        k: a.k.unwrap_or(3),
        c: a.c.unwrap_or(2),
        beta: a.beta.unwrap_or(1.0),
        support: a.support.unwrap_or(Support::ExactlyK),
        ensemble: a.ensemble.unwrap_or(Ensemble::UniformExactlyC),
        seed: a.seed.unwrap_or(0),
        exponent: a.exponent.unwrap_or(GOODNESS_EXPONENT),
        split_exponent: a.split_exponent.unwrap_or(SPLIT_EXPONENT),
        family_size: capped(a.family_size.unwrap_or(DEFAULT_FAMILY), 32, quick),
        times: a.times.clone().unwrap_or_else(|| vec![0.1, 1.0, 10.0, 100.0]),
    };
    let inst = sample_local_instance(p.n, p.k, p.c, p.beta, p.support.into(), p.seed)?;
    let mut run = Run::new("local-instance", p.seed, &p)?;

    let good = goodness_check(&inst, p.exponent)?;
    run.invariant(
        "goodness fractions in [0, 1]",
        good.per_x_fraction.iter().all(|f| (0.0..=1.0).contains(f)),
        format!("{} basis states", good.per_x_fraction.len()),
    );
    if matches!(p.ensemble, Ensemble::UniformExactlyC) {
        let proj = spike_averaged_projector(&inst, p.ensemble.into(), p.exponent)?;
        run.invariant(
            "spike-averaged projector equals goodness",
            proj == good.per_x_fraction,
            "diagonal compared entrywise",
        );
    }

    let ts = random_t_family(p.n, p.c, p.family_size, p.seed)?;
    let cov = covariance_bruteforce(p.n, p.k, p.c, &ts)?;
    run.invariant("covariance symmetric", cov.is_symmetric(), format!("dim {}", cov.dim()));
    run.invariant(
        "covariance depends only on intersections",
        cov.depends_only_on_intersection(),
        format!("dim {}", cov.dim()),
    );
    let psd = covariance_psd_check(&cov)?;
    run.claim(
        "covariance min eigenvalue above floor",
        psd.holds,
        format!("min eig {:.6} vs floor {}", psd.min_eigenvalue, psd.claimed_floor),
    );

    let spike = sample_spike(p.n, p.c, p.ensemble.into(), p.seed)?;
    let mut per_step = Vec::new();
    if p.n <= MAX_STATE_QUBITS {
        for (i, &t) in p.times.iter().enumerate() {
            let psi = haar_state(1 << p.n, p.seed, i as u32)?;
            per_step.push(per_step_split_bound_with(&inst, &spike, &psi, t, p.split_exponent)?);
        }
        let held = per_step.iter().filter(|s| s.holds).count();
        run.claim(
            "per-step split bound",
            held == per_step.len(),
            format!("{held}/{} steps within bound", per_step.len()),
        );
    } else {
        log::warn!("n = {} exceeds {MAX_STATE_QUBITS}; per-step split bound skipped", p.n);
    }

    run.put("alpha_terms", inst.alpha().len())?;
    run.put("alpha_linf", inst.alpha_linf())?;
    run.put("sigma2", inst.sigma2())?;
    run.put("threshold", good.threshold)?;
    run.put("max_goodness_fraction", good.max_fraction)?;
    run.put("mean_goodness_fraction", good.mean_fraction)?;
    run.put(
        "psd",
        json!({
            "dim": psd.dim,
            "min_eig": psd.min_eigenvalue,
            "floor": psd.claimed_floor,
            "holds": psd.holds,
        }),
    )?;
    run.put("spike_x_mask", spike.x_mask())?;
    run.put("per_step", &per_step)?;
    Ok(run)
}

// verify-identities

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct IdentityArgs {
    /// Largest n in the closed-form sweep [default: 16; --quick caps it at 10].
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Largest c in the closed-form sweep [default: 4].
    #[arg(long)]
    pub max_c: Option<usize>,
    /// Largest l in the binomial-sum identity [default: 64; --quick caps it at 32].
    #[arg(long)]
    pub max_l: Option<usize>,
    /// Largest n scanned by the nonnegativity report [default: 48; --quick caps it at 24].
    #[arg(long)]
    pub nonneg_max_n: Option<usize>,
}

#[derive(Serialize)]
struct IdentityParams {
    max_n: usize,
    max_c: usize,
    max_l: usize,
    nonneg_max_n: usize,
}

pub fn verify_identities(a: &IdentityArgs, quick: bool) -> Result<Run, CliError> {
    let p = IdentityParams {
        max_n: capped(a.max_n.unwrap_or(16), 10, quick),
        max_c: a.max_c.unwrap_or(4),
        max_l: capped(a.max_l.unwrap_or(64), 32, quick),
        nonneg_max_n: capped(a.nonneg_max_n.unwrap_or(48), 24, quick),
    };
    if p.max_c == 0 {
        return Err(CliError::Usage("--max-c must be at least 1".into()));
    }
    let table = BinomTable::new(p.max_l.max(4 * p.max_n.max(p.nonneg_max_n)));
    let mut run = Run::new("verify-identities", 0, &p)?;

    let mut simple = (0usize, 0usize);
    for l in 0..=p.max_l {
        for t in 0..=l {
            simple.0 += 1;
            if !verify_simple_identity(l, t, &table)? {
                simple.1 += 1;
            }
        }
    }
    run.invariant(
        "binomial-sum identity",
        simple.1 == 0,
        format!("{}/{} failures", simple.1, simple.0),
    );

    // (c, r) -> (checked, failed)
    let mut by_cr: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let mut failures: Vec<IdentityCheck> = Vec::new();
    let (mut disagree, mut recon_fail, mut recon_checked, mut skipped) = (0usize, 0usize, 0usize, 0usize);
    for n in 1..=p.max_n {
        for c in 1..=p.max_c {
            if 2 * c > n {
                continue;
            }
            for k in (3 * c).div_ceil(2)..=(3 * c).min(n) {
                recon_checked += 1;
                if !verify_reconstruction(n, k, c, &table)? {
                    recon_fail += 1;
                }
                for r in 0..=c.min(k) {
                    let part = verify_complex_identity(n, k, c, r, ZMethod::PartitionSum, &table)?;
                    match verify_complex_identity(n, k, c, r, ZMethod::Enumerate, &table) {
                        Ok(e) if e.lhs != part.lhs => disagree += 1,
                        Ok(_) => {}
                        Err(hamlb::Error::DimensionGuard { .. }) => skipped += 1,
                        Err(e) => return Err(e.into()),
                    }
                    let slot = by_cr.entry((c, r)).or_default();
                    slot.0 += 1;
                    if !part.pass {
                        slot.1 += 1;
                        failures.push(part);
                    }
                }
            }
        }
    }
    run.invariant(
        "enumeration agrees with partition sum",
        disagree == 0,
        format!("{disagree} disagreements, {skipped} too large to enumerate"),
    );
    run.invariant(
        "counts rebuilt from alternating sums",
        recon_fail == 0,
        format!("{recon_fail}/{recon_checked} failures"),
    );
    for (&(c, r), &(checked, failed)) in &by_cr {
        run.claim(
            format!("closed form c={c} r={r}"),
            failed == 0,
            format!("{failed}/{checked} failures"),
        );
    }

    let mut minimal = Vec::new();
    for c in 2..=p.max_c {
        for k in (3 * c).div_ceil(2)..=3 * c {
            minimal.push(minimal_nonnegative_n(k, c, p.nonneg_max_n, &table)?);
        }
    }
    run.csv = Some(to_csv(&minimal)?);

    run.put("closed_form_checked", by_cr.values().map(|v| v.0).sum::<usize>())?;
    run.put("closed_form_failures", failures.len())?;
    run.put("first_failures", &failures[..failures.len().min(20)])?;
    run.put("minimal_n", &minimal)?;
    Ok(run)
}

// matrix-bound-sweep

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    /// Matrix dimension [default: 32; --quick caps it at 16].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Minimum diagonal gap D [default: 1000].
    #[arg(long = "D")]
    #[serde(rename = "D")]
    pub gap: Option<f64>,
    /// Perturbation norm C [default: 1].
    #[arg(long = "C")]
    #[serde(rename = "C")]
    pub strength: Option<f64>,
    /// Random matrix pairs [default: 100; --quick caps it at 10].
    #[arg(long)]
    pub trials: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Smallest time of the log-spaced grid [default: 0.001].
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Largest time of the log-spaced grid [default: 100000].
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Grid points [default: 33; --quick caps it at 9].
    #[arg(long)]
    pub t_points: Option<usize>,
}

pub fn matrix_bound_sweep(a: &SweepArgs, quick: bool) -> Result<Run, CliError> {
    let cfg = SweepConfig {
        dim: capped(a.dim.unwrap_or(32), 16, quick),
        gap: a.gap.unwrap_or(1000.0),
        strength: a.strength.unwrap_or(1.0),
        trials: capped(a.trials.unwrap_or(100), 10, quick),
        t_grid: log_grid(
            a.t_min.unwrap_or(1e-3),
            a.t_max.unwrap_or(1e5),
            capped(a.t_points.unwrap_or(33), 9, quick),
        )?,
        seed: a.seed.unwrap_or(0),
    };
    cfg.validate()?;
    let rep = perturbation_sweep(&cfg)?;
    let mut run = Run::new("matrix-bound-sweep", cfg.seed, &cfg)?;
    run.invariant(
        "distance within min(C t, 2)",
        rep.trivial_bound_violations == 0,
        format!("{} rows over", rep.trivial_bound_violations),
    );
    run.invariant(
        "realized gap at least D",
        rep.min_realized_gap >= cfg.gap,
        format!("min gap {}", rep.min_realized_gap),
    );
    run.claim(
        "max ratio within guard",
        rep.max_ratio <= GUARD,
        format!("max ratio {:.4} vs guard {GUARD}", rep.max_ratio),
    );
    let per_t: Vec<Value> = cfg
        .t_grid
        .iter()
        .map(|&t| {
            let m = rep.rows.iter().filter(|r| r.t == t).map(|r| r.ratio).fold(0.0, f64::max);
            json!({ "t": t, "bound": cfg.bound(t), "max_ratio": m })
        })
        .collect();
    run.csv = Some(to_csv(&rep.rows)?);
    run.put("max_ratio", rep.max_ratio)?;
    run.put("guard", GUARD)?;
    run.put("min_realized_gap", rep.min_realized_gap)?;
    run.put("trivial_bound_violations", rep.trivial_bound_violations)?;
    run.put("rows", rep.rows.len())?;
    run.put("per_t", per_t)?;
    Ok(run)
}

// discrimination-game

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct GameArgs {
    /// Instance family [default: worst].
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Qubits [default: 8; --quick caps it at 8].
    #[arg(long)]
    pub n: Option<usize>,
    /// Locality k of the local family [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Spike size c of the local family [default: 2].
    #[arg(long)]
    pub c: Option<usize>,
    /// Rounds [default: 10; --quick caps it at 5].
    #[arg(long)]
    pub m: Option<usize>,
    /// Spike magnitude beta [default: 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Hardness exponent delta of the worst family [default: 0.1].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Degrees of the local family [default: exactly-k].
    #[arg(long, value_enum)]
    pub support: Option<Support>,
    /// Spike ensemble of the local family [default: uniform-exactly-c].
    #[arg(long, value_enum)]
    pub ensemble: Option<Ensemble>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Round times are uniform on (0, t-max] [default: 4].
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Replace the random schedule by an adversarial hill-climbing search
    /// (n <= 10) [default: false].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub search: Option<bool>,
    /// Search restarts [default: 50; --quick caps it at 4].
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Search steps per restart [default: 40; --quick caps it at 10].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Search time range [default: 0.001].
    #[arg(long)]
    pub search_t_min: Option<f64>,
    /// Search time range [default: 100000].
    #[arg(long)]
    pub search_t_max: Option<f64>,
}

#[derive(Serialize)]
struct GameParams {
    family: Family,
    n: usize,
    k: usize,
    c: usize,
    m: usize,
    beta: f64,
    delta: f64,
    support: Support,
    ensemble: Ensemble,
    seed: u64,
    t_max: f64,
    search: Option<SearchConfig>,
}

#[derive(Serialize)]
struct StepRow {
    k: usize,
    t_k: f64,
    delta_k: f64,
    bound_k: f64,
}

pub fn discrimination_game(a: &GameArgs, quick: bool) -> Result<Run, CliError> {
    let search = a.search.unwrap_or(false).then(|| SearchConfig {
        restarts: capped(a.restarts.unwrap_or(50), 4, quick),
        iterations: capped(a.iterations.unwrap_or(40), 10, quick),
        t_min: a.search_t_min.unwrap_or(1e-3),
        t_max: a.search_t_max.unwrap_or(1e5),
        ..SearchConfig::default()
    });
    let p = GameParams {
        family: a.family.unwrap_or(Family::Worst),
        n: capped(a.n.unwrap_or(8), 8, quick),
        k: a.k.unwrap_or(3),
        c: a.c.unwrap_or(2),
        m: capped(a.m.unwrap_or(10), 5, quick),
        beta: a.beta.unwrap_or(1.0),
        delta: a.delta.unwrap_or(0.1),
        support: a.support.unwrap_or(Support::ExactlyK),
        ensemble: a.ensemble.unwrap_or(Ensemble::UniformExactlyC),
        seed: a.seed.unwrap_or(0),
        t_max: a.t_max.unwrap_or(4.0),
        search,
    };
    if p.m == 0 || !(p.t_max > 0.0 && p.t_max.is_finite()) {
        return Err(CliError::Usage("game needs m >= 1 and a finite t-max > 0".into()));
    }
    let mut run = Run::new("discrimination-game", p.seed, &p)?;

    let (h0, h1, envelope) = match p.family {
        Family::Worst => {
            let inst = build_worst_instance(p.n, p.delta, p.beta, p.seed)?;
            let (h0, h1) = worst_case_pair(&inst);
            (h0, h1, Some(p.m as f64 * GUARD * inst.distance_bound()))
        }
        Family::Local => {
            let inst = sample_local_instance(p.n, p.k, p.c, p.beta, p.support.into(), p.seed)?;
            let spike = sample_spike(p.n, p.c, p.ensemble.into(), p.seed)?;
            run.put("spike_x_mask", spike.x_mask())?;
            let (h0, h1) = local_pair(&inst, spike.x_mask() as usize);
            (h0, h1, None)
        }
    };

    let transcript = match &p.search {
        None => {
            let mut rng = seeding::substream(p.seed, TIMES_STREAM, 0);
            let times: Vec<f64> = (0..p.m).map(|_| p.t_max * (1.0 - rng.random::<f64>())).collect();
            let schedule = RoundSchedule::haar(h0.dim(), &times, rng.random::<u64>())?;
            run_game(&h0, &h1, &schedule)?
        }
        Some(cfg) => {
            let (_, res) = adversarial_schedule_search(&h0, &h1, p.m, cfg, p.seed, None)?;
            run.invariant("search result dominated by bound sum", res.dominated, "");
            run.put(
                "search",
                json!({
                    "restart_best": res.restart_best,
                    "best_restart": res.best_restart,
                }),
            )?;
            res.best
        }
    };

    run.invariant(
        "hybrid chain",
        transcript.hybrid_chain_ok,
        format!("total {:.6e} vs step sum {:.6e}", transcript.total_dist, transcript.sum_step_dist),
    );
    run.invariant("steps dominated by operator norms", transcript.step_domination_ok, "");
    run.invariant(
        "norm preserved",
        transcript.max_norm_defect <= NORM_TOL,
        format!("max defect {:.3e}", transcript.max_norm_defect),
    );
    run.invariant(
        "Helstrom within Euclidean",
        transcript.advantage.helstrom <= transcript.advantage.euclidean + CHAIN_TOL,
        format!(
            "{:.6} vs {:.6}",
            transcript.advantage.helstrom, transcript.advantage.euclidean
        ),
    );
    if let Some(env) = envelope {
        run.claim(
            "total distance within m guard bound",
            transcript.total_dist <= env,
            format!("{:.6} vs {:.6}", transcript.total_dist, env),
        );
        run.put("envelope", env)?;
    }

    let rows: Vec<StepRow> = (0..transcript.m)
        .map(|i| StepRow {
            k: i + 1,
            t_k: transcript.times[i],
            delta_k: transcript.per_step_dist[i],
            bound_k: transcript.per_step_bound[i],
        })
        .collect();
    run.csv = Some(to_csv(&rows)?);
    run.put("bound_sum", transcript.bound_sum())?;
    run.put("transcript", &transcript)?;
    Ok(run)
}

// goodness-scaling

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct GoodnessArgs {
    /// Register sizes, comma separated [default: 10,12,14,16; --quick keeps n <= 12].
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Locality k [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Spike size c [default: 2].
    #[arg(long)]
    pub c: Option<usize>,
    /// Instances per n [default: 5; --quick caps it at 2].
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Threshold exponent [default: 0.1].
    #[arg(long, allow_hyphen_values = true)]
    pub exponent: Option<f64>,
    /// Degrees carrying Gaussian coefficients [default: exactly-k].
    #[arg(long, value_enum)]
    pub support: Option<Support>,
    /// Root seed; instance seeds are drawn from it [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct GoodnessParams {
    ns: Vec<usize>,
    k: usize,
    c: usize,
    seeds: usize,
    exponent: f64,
    support: Support,
    seed: u64,
}

#[derive(Serialize)]
struct GoodnessRow {
    n: usize,
    k: usize,
    c: usize,
    seed: u64,
    max_fraction: f64,
}

pub fn goodness_scaling(a: &GoodnessArgs, quick: bool) -> Result<Run, CliError> {
    let mut ns = a.ns.clone().unwrap_or_else(|| vec![10, 12, 14, 16]);
    if quick {
        ns.retain(|&n| n <= 12);
    }
    let p = GoodnessParams {
        ns,
        k: a.k.unwrap_or(3),
        c: a.c.unwrap_or(2),
        seeds: capped(a.seeds.unwrap_or(5), 2, quick),
        exponent: a.exponent.unwrap_or(GOODNESS_EXPONENT),
        support: a.support.unwrap_or(Support::ExactlyK),
        seed: a.seed.unwrap_or(0),
    };
    if p.ns.is_empty() || p.seeds == 0 {
        return Err(CliError::Usage("goodness scaling needs at least one n and one seed".into()));
    }
    let mut run = Run::new("goodness-scaling", p.seed, &p)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (i, &n) in p.ns.iter().enumerate() {
        let mut rng = seeding::substream(p.seed, SCALING_STREAM, i as u32);
        let mut fractions = Vec::with_capacity(p.seeds);
        for _ in 0..p.seeds {
            let s = rng.random::<u64>();
            let inst = sample_local_instance(n, p.k, p.c, 1.0, p.support.into(), s)?;
            let rep = goodness_check(&inst, p.exponent)?;
            fractions.push(rep.max_fraction);
            rows.push(GoodnessRow {
                n,
                k: p.k,
                c: p.c,
                seed: s,
                max_fraction: rep.max_fraction,
            });
        }
        summary.push(json!({
            "n": n,
            "median_max_fraction": median(fractions.clone()),
            "max_max_fraction": fractions.iter().cloned().fold(0.0, f64::max),
        }));
    }
    run.invariant(
        "fractions in [0, 1]",
        rows.iter().all(|r| (0.0..=1.0).contains(&r.max_fraction)),
        format!("{} instances", rows.len()),
    );
    let medians: Vec<f64> = summary.iter().map(|s| s["median_max_fraction"].as_f64().unwrap_or(f64::NAN)).collect();
    let mut sorted_ns = p.ns.clone();
    sorted_ns.sort_unstable();
    if sorted_ns == p.ns {
        run.claim(
            "median max fraction non-increasing in n",
            medians.windows(2).all(|w| w[1] <= w[0]),
            format!("{medians:?}"),
        );
    }
    run.csv = Some(to_csv(&rows)?);
    run.put("summary", summary)?;
    Ok(run)
}
