use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use robust_mdp::parallel::threads_from_env;
use robust_mdp::{
    bellman_sweep, random_instance, residual_ratio, Mdp, NormIndex, Rectangularity, Uncertainty,
    ValueFunction,
};

use crate::{median, CliError, Result};

pub const BENCH_CSV_HEADER: &str = "setting,S,A,ms_per_iter,relative_cost,residual_ratio";

/// Residuals used for the decay-rate fit.
pub const RATIO_WINDOW: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchSetting {
    pub rect: Rectangularity,
    pub p: NormIndex,
}

impl BenchSetting {
    pub const NON_ROBUST: BenchSetting =
        BenchSetting { rect: Rectangularity::NonRobust, p: NormIndex::Two };

    pub fn new(rect: Rectangularity, p: NormIndex) -> Self {
        Self { rect, p }
    }

    /// `none`, `sa-p1`, `s-pinf`, `s-p2.5`, ...
    pub fn id(&self) -> String {
        match self.rect {
            Rectangularity::NonRobust => "none".to_string(),
            rect => format!("{rect}-p{}", self.p),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    /// `(S, A)` pairs.
    pub sizes: Vec<(usize, usize)>,
    pub settings: Vec<BenchSetting>,
    pub repeats: usize,
    pub gamma: f64,
    /// Applied to every `alpha` and `beta`.
    pub radii: f64,
    pub iters: usize,
    pub seed: u64,
    /// Bisection width for kappa and water levels.
    pub inner_tol: f64,
    /// `None` defers to `ROBUSTMDP_THREADS`.
    pub threads: Option<usize>,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            sizes: vec![(10, 10), (100, 20)],
            settings: Self::rate_grid(),
            repeats: 5,
            gamma: 0.9,
            radii: 0.1,
            iters: 100,
            seed: 0,
            inner_tol: 1e-10,
            threads: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    sizes: Vec<(usize, usize)>,
    settings: Vec<RawSetting>,
    #[serde(default = "default_repeats")]
    repeats: usize,
    #[serde(default = "default_gamma")]
    gamma: f64,
    #[serde(default = "default_radii")]
    radii: f64,
    #[serde(default = "default_iters")]
    iters: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_inner_tol")]
    inner_tol: f64,
    #[serde(default)]
    threads: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSetting {
    rect: String,
    #[serde(default)]
    p: Option<RawNorm>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawNorm {
    Number(f64),
    Text(String),
}

fn default_repeats() -> usize {
    5
}
fn default_gamma() -> f64 {
    0.9
}
fn default_radii() -> f64 {
    0.1
}
fn default_iters() -> usize {
    100
}
fn default_inner_tol() -> f64 {
    1e-10
}

impl BenchSpec {
    /// Non-robust plus `sa`/`s` at `p = 1, 2, inf, 5, 10`.
    pub fn rate_grid() -> Vec<BenchSetting> {
        let mut out = vec![BenchSetting::NON_ROBUST];
        let ps = [
            NormIndex::One,
            NormIndex::Two,
            NormIndex::Infinity,
            NormIndex::from_exponent(5.0).unwrap(),
            NormIndex::from_exponent(10.0).unwrap(),
        ];
        for rect in [Rectangularity::SA, Rectangularity::S] {
            out.extend(ps.iter().map(|&p| BenchSetting::new(rect, p)));
        }
        out
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| CliError::Spec(e.to_string()))?;
        let settings = raw
            .settings
            .into_iter()
            .map(|s| {
                let rect = Rectangularity::from_str(&s.rect)?;
                let p = match s.p {
                    None => NormIndex::Two,
                    Some(RawNorm::Number(r)) => NormIndex::from_exponent(r)?,
                    Some(RawNorm::Text(t)) => t.parse()?,
                };
                Ok(BenchSetting::new(rect, p))
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = Self {
            sizes: raw.sizes,
            settings,
            repeats: raw.repeats,
            gamma: raw.gamma,
            radii: raw.radii,
            iters: raw.iters,
            seed: raw.seed,
            inner_tol: raw.inner_tol,
            threads: raw.threads,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Spec(m.to_string()));
        if self.sizes.is_empty() || self.sizes.iter().any(|&(s, a)| s == 0 || a == 0) {
            return bad("sizes must be nonempty with positive S and A");
        }
        if self.repeats < 3 {
            return bad("repeats must be at least 3");
        }
        if self.iters < 10 {
            return bad("iters must be at least 10");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.radii >= 0.0 && self.radii.is_finite()) {
            return bad("radii must be finite and nonnegative");
        }
        if self.inner_tol.is_nan() || self.inner_tol <= 0.0 {
            return bad("inner_tol must be positive");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.threads.unwrap_or_else(threads_from_env)
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BenchRow {
    pub setting: String,
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    pub ms_per_iter: f64,
    pub relative_cost: f64,
    /// NaN when the residuals vanish before the fit window.
    pub residual_ratio: f64,
}

/// Median wall time per sweep over `repeats` runs of `iters` sweeps from
/// `v = 0`, plus the residual history of the first run.
fn time_setting(inst: &Mdp, unc: &Uncertainty, spec: &BenchSpec, workers: usize) -> Result<(f64, Vec<f64>)> {
    let mut samples = Vec::with_capacity(spec.repeats);
    let mut residuals = Vec::with_capacity(spec.iters);
    for rep in 0..spec.repeats {
        let mut v = ValueFunction::zeros(inst.num_states);
        let started = Instant::now();
        for _ in 0..spec.iters {
            let (next, _, _) = bellman_sweep(inst, unc, &v.0, spec.inner_tol, workers)?;
            if rep == 0 {
                residuals.push(next.sup_distance(&v));
            }
            v = next;
        }
        samples.push(started.elapsed().as_secs_f64() * 1e3 / spec.iters as f64);
    }
    Ok((median(&mut samples), residuals))
}

/// Every `(size, setting)` in order. The non-robust reference is timed for
/// each size even when it is not listed, and reported only when listed.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let workers = spec.workers();
    let mut rows = Vec::new();
    for &(ns, na) in &spec.sizes {
        let inst = random_instance::<f64>(ns, na, spec.seed, 1.0)?.with_discount(spec.gamma)?;
        let (base_ms, _) = time_setting(&inst, &Uncertainty::non_robust(), spec, workers)?;
        for setting in &spec.settings {
            let unc = Uncertainty::uniform(setting.rect, setting.p, ns, na, spec.radii, spec.radii);
            let (ms, residuals) = if setting.rect == Rectangularity::NonRobust {
                (base_ms, time_setting(&inst, &unc, spec, workers)?.1)
            } else {
                time_setting(&inst, &unc, spec, workers)?
            };
            let ratio = residual_ratio(&residuals, RATIO_WINDOW).unwrap_or(f64::NAN);
            let row = BenchRow {
                setting: setting.id(),
                num_states: ns,
                num_actions: na,
                ms_per_iter: ms,
                relative_cost: ms / base_ms,
                residual_ratio: ratio,
            };
            log::info!("{row:?}");
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(BENCH_CSV_HEADER.split(','))?;
    }
    w.flush().map_err(|e| CliError::io("csv output", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml_with_mixed_norms() {
        let spec = BenchSpec::from_toml_str(
            r#"
            sizes = [[5, 3], [8, 2]]
            repeats = 3
            iters = 10
            seed = 4
            settings = [
                { rect = "none" },
                { rect = "sa", p = 1 },
                { rect = "s", p = "inf" },
                { rect = "s", p = 2.5 },
            ]
            "#,
        )
        .unwrap();
        assert_eq!(spec.sizes, vec![(5, 3), (8, 2)]);
        let ids: Vec<String> = spec.settings.iter().map(BenchSetting::id).collect();
        assert_eq!(ids, ["none", "sa-p1", "s-pinf", "s-p2.5"]);
        assert_eq!(spec.gamma, 0.9);
        assert_eq!(spec.radii, 0.1);
    }

    #[test]
    fn rejects_bad_specs() {
        let base = "sizes = [[5, 3]]\nsettings = [{ rect = \"s\", p = 2 }]\n";
        assert!(BenchSpec::from_toml_str(base).is_ok());
        assert!(BenchSpec::from_toml_str(&format!("{base}repeats = 2\n")).is_err());
        assert!(BenchSpec::from_toml_str(&format!("{base}iters = 9\n")).is_err());
        assert!(BenchSpec::from_toml_str(&format!("{base}bogus = 1\n")).is_err());
        assert!(BenchSpec::from_toml_str("sizes = [[5, 3]]\nsettings = [{ rect = \"x\" }]").is_err());
        assert!(BenchSpec::from_toml_str("sizes = [[5, 3]]\nsettings = [{ rect = \"s\", p = 0.5 }]").is_err());
    }

    #[test]
    fn nonrobust_row_is_unit_cost() {
        let spec = BenchSpec {
            sizes: vec![(6, 3)],
            settings: vec![BenchSetting::NON_ROBUST, BenchSetting::new(Rectangularity::S, NormIndex::One)],
            repeats: 3,
            iters: 30,
            threads: Some(1),
            ..BenchSpec::default()
        };
        let rows = run_bench(&spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].relative_cost, 1.0);
        assert!(rows[1].relative_cost > 0.0);
        assert!(rows.iter().all(|r| (r.residual_ratio - 0.9).abs() < 0.05));
    }

    #[test]
    fn csv_header_and_shape() {
        let row = BenchRow {
            setting: "s-p2".into(),
            num_states: 3,
            num_actions: 2,
            ms_per_iter: 0.5,
            relative_cost: 2.0,
            residual_ratio: 0.9,
        };
        let mut buf = Vec::new();
        write_bench_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), BENCH_CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "s-p2,3,2,0.5,2.0,0.9");
        let mut buf = Vec::new();
        write_bench_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), BENCH_CSV_HEADER);
    }
}
