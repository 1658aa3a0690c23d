//! Command-line flags, figure presets and their resolution into experiments.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use css_core::analytic::{FusionRule, FusionSpec};
use css_core::montecarlo::{q_spaced_grid, Combiner, EnergyModel, ExperimentConfig, Scheme, VarianceSource};
use css_core::simchan::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Sensing events per grid point for custom runs and the fig1–fig3 presets.
pub const DEFAULT_EVENTS: usize = 200_000;
/// Sensing events per grid point for the fig4 preset, which runs 120 curves.
pub const FIG4_EVENTS: usize = 20_000;
/// Largest CR count swept by the fig4 preset.
pub const FIG4_MAX_CRS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Proposed OR fusion, K=3, −20 dB, history length L ∈ {5, 10, 15, 20}.
    Fig1,
    /// Proposed OR fusion, L=15, −20 dB, K ∈ {1, 3, 5, 7}.
    Fig2,
    /// K=7, L=15, −15 dB, l=3: proposed and conventional under AND/OR/majority, plus MRC.
    Fig3,
    /// L=15, −15 dB: proposed OR, conventional OR and MRC for K = 1..40.
    Fig4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Conventional,
    Proposed,
    /// Soft maximal-ratio combining with the conventional detector.
    Mrc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    And,
    Or,
    Majority,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    /// Mean power of a noise-only reference window.
    Estimated,
    /// The simulator's true per-event variance.
    Genie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    /// Draw each energy from its exact chi-square law.
    Exact,
    /// Generate and sum every sample.
    Samples,
}

/// Monte Carlo ROC experiments for energy-detection cooperative spectrum sensing.
///
/// The noise-uncertainty half-width defaults to 1 dB; it is not a figure from
/// any measurement, only a representative level.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "css-sim", version, about, long_about = None)]
pub struct Args {
    /// Figure preset; explicit flags override its parameters.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Hard fusion rule at the fusion center.
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    /// Samples per sensing event (N).
    #[arg(long, value_parser = positive_usize)]
    pub num_samples: Option<usize>,
    /// Number of cooperating CRs (K).
    #[arg(long, value_parser = positive_usize)]
    pub num_crs: Option<usize>,
    /// Stored energy records per CR (L ≥ 2).
    #[arg(long, value_parser = history_len)]
    pub history_len: Option<usize>,
    /// Votes needed by the majority rule (defaults to ⌈K/2⌉).
    #[arg(long, value_parser = positive_usize)]
    pub majority_l: Option<usize>,
    /// Mean SNR of the Rayleigh channel, dB.
    #[arg(long, value_parser = finite_f64, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// Half-width of the uniform noise-power wobble, dB.
    #[arg(long, value_parser = nonnegative_f64, allow_hyphen_values = true)]
    pub uncertainty_db: Option<f64>,
    /// Long-run fraction of events with the primary user active.
    #[arg(long, value_parser = open_unit)]
    pub duty_cycle: Option<f64>,
    /// Mean number of events the primary user holds one state.
    #[arg(long, value_parser = at_least_one)]
    pub dwell_events: Option<f64>,
    /// Sensing events per grid point.
    #[arg(long, value_parser = positive_usize)]
    pub events: Option<usize>,
    /// Comma-separated, strictly increasing CFAR targets in (0, 1).
    #[arg(long, value_parser = pfa_grid)]
    pub pfa_grid: Option<PfaGrid>,
    /// Master seed; every random stream is derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Source of each CR's noise-variance figure.
    #[arg(long, value_enum)]
    pub variance_source: Option<VarianceArg>,
    /// How per-CR energies are produced.
    #[arg(long, value_enum)]
    pub energy_model: Option<EngineArg>,
    /// Count the events that fill the energy history as well.
    #[arg(long)]
    pub include_warmup: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the run manifest (default: next to --out).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Re-run the experiments recorded in a manifest (or JSON output).
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = positive_usize)]
    pub threads: Option<usize>,
    /// Do not print the summary report.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfaGrid(pub Vec<f64>);

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn history_len(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        Ok(_) => Err("must be at least 2".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn finite_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("must be finite".into())
    }
}

fn nonnegative_f64(s: &str) -> Result<f64, String> {
    let v = finite_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err("must be nonnegative".into())
    }
}

fn at_least_one(s: &str) -> Result<f64, String> {
    let v = finite_f64(s)?;
    if v >= 1.0 {
        Ok(v)
    } else {
        Err("must be at least 1".into())
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v = finite_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn pfa_grid(s: &str) -> Result<PfaGrid, String> {
    let v = s
        .split(',')
        .map(|t| open_unit(t.trim()))
        .collect::<Result<Vec<f64>, String>>()?;
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err("values must be strictly increasing".into());
    }
    Ok(PfaGrid(v))
}

/// Default CFAR grid: `Q(z)` for `z` from −4 to 12 in steps of 0.5. The far
/// tail matters: under noise uncertainty the conventional detector needs very
/// small nominal targets before its real false-alarm rate drops.
pub fn default_pfa_grid() -> Vec<f64> {
    q_spaced_grid(-4.0, 12.0, 0.5).expect("constant grid bounds are valid")
}

/// Everything a run needs: the experiments in output order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub preset: Option<Preset>,
    pub experiments: Vec<ExperimentConfig>,
}

/// Scalar settings after applying the preset and explicit overrides.
#[derive(Debug, Clone)]
struct Settings {
    scheme: SchemeArg,
    rule: RuleArg,
    majority_l: Option<usize>,
    history_len: usize,
    scenario: ScenarioConfig,
    events: usize,
    grid: Vec<f64>,
    variance: VarianceSource,
    engine: EnergyModel,
    warmup_excluded: bool,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Turns parsed flags into a validated run plan.
pub fn resolve(args: &Args) -> Result<RunPlan, CliError> {
    check_conflicts(args)?;
    let mut s = Settings {
        scheme: SchemeArg::Proposed,
        rule: RuleArg::Or,
        majority_l: None,
        history_len: 15,
        scenario: ScenarioConfig::default(),
        events: DEFAULT_EVENTS,
        grid: default_pfa_grid(),
        variance: VarianceSource::Estimated,
        engine: EnergyModel::Exact,
        warmup_excluded: true,
    };

    // preset parameters first
    match args.preset {
        Some(Preset::Fig1) => {
            s.scenario.snr_bar_db = -20.0;
            s.scenario.k_crs = 3;
        }
        Some(Preset::Fig2) => {
            s.scenario.snr_bar_db = -20.0;
        }
        Some(Preset::Fig3) => {
            s.scenario.snr_bar_db = -15.0;
            s.scenario.k_crs = 7;
            s.majority_l = Some(3);
        }
        Some(Preset::Fig4) => {
            s.scenario.snr_bar_db = -15.0;
            s.events = FIG4_EVENTS;
        }
        None => {}
    }

    // then explicit overrides
    if let Some(v) = args.scheme {
        s.scheme = v;
    }
    if let Some(v) = args.rule {
        s.rule = v;
    }
    if let Some(v) = args.majority_l {
        s.majority_l = Some(v);
    }
    if let Some(v) = args.num_samples {
        s.scenario.n_samples = v;
    }
    if let Some(v) = args.num_crs {
        s.scenario.k_crs = v;
    }
    if let Some(v) = args.history_len {
        s.history_len = v;
    }
    if let Some(v) = args.snr_db {
        s.scenario.snr_bar_db = v;
    }
    if let Some(v) = args.uncertainty_db {
        s.scenario.uncertainty_db = v;
    }
    if let Some(v) = args.duty_cycle {
        s.scenario.duty_cycle = v;
    }
    if let Some(v) = args.dwell_events {
        s.scenario.pu_dwell_events = v;
    }
    if let Some(v) = args.events {
        s.events = v;
    }
    if let Some(v) = &args.pfa_grid {
        s.grid = v.0.clone();
    }
    if let Some(v) = args.seed {
        s.scenario.seed = v;
    }
    if let Some(v) = args.variance_source {
        s.variance = match v {
            VarianceArg::Estimated => VarianceSource::Estimated,
            VarianceArg::Genie => VarianceSource::Genie,
        };
    }
    if let Some(v) = args.energy_model {
        s.engine = match v {
            EngineArg::Exact => EnergyModel::Exact,
            EngineArg::Samples => EnergyModel::Samples,
        };
    }
    if args.include_warmup {
        s.warmup_excluded = false;
    }

    let experiments = match args.preset {
        None => vec![experiment(&s, s.scheme, s.rule, s.scenario.k_crs, s.history_len, None)?],
        Some(Preset::Fig1) => [5, 10, 15, 20]
            .into_iter()
            .map(|l| experiment(&s, s.scheme, s.rule, s.scenario.k_crs, l, Some(format!("l{l}"))))
            .collect::<Result<_, _>>()?,
        Some(Preset::Fig2) => [1, 3, 5, 7]
            .into_iter()
            .map(|k| experiment(&s, s.scheme, s.rule, k, s.history_len, Some(format!("k{k}"))))
            .collect::<Result<_, _>>()?,
        Some(Preset::Fig3) => {
            let k = s.scenario.k_crs;
            let mut v = Vec::new();
            for scheme in [SchemeArg::Proposed, SchemeArg::Conventional] {
                for rule in [RuleArg::And, RuleArg::Or, RuleArg::Majority] {
                    v.push(experiment(&s, scheme, rule, k, s.history_len, None)?);
                }
            }
            v.push(experiment(&s, SchemeArg::Mrc, s.rule, k, s.history_len, None)?);
            v
        }
        Some(Preset::Fig4) => {
            let mut v = Vec::new();
            for scheme in [SchemeArg::Proposed, SchemeArg::Conventional, SchemeArg::Mrc] {
                for k in 1..=FIG4_MAX_CRS {
                    v.push(experiment(&s, scheme, RuleArg::Or, k, s.history_len, Some(format!("k{k}")))?);
                }
            }
            v
        }
    };
    Ok(RunPlan {
        preset: args.preset,
        experiments,
    })
}

fn check_conflicts(args: &Args) -> Result<(), CliError> {
    if args.replay.is_some() {
        let configured = args.preset.is_some()
            || args.scheme.is_some()
            || args.rule.is_some()
            || args.num_samples.is_some()
            || args.num_crs.is_some()
            || args.history_len.is_some()
            || args.majority_l.is_some()
            || args.snr_db.is_some()
            || args.uncertainty_db.is_some()
            || args.duty_cycle.is_some()
            || args.dwell_events.is_some()
            || args.events.is_some()
            || args.pfa_grid.is_some()
            || args.seed.is_some()
            || args.variance_source.is_some()
            || args.energy_model.is_some()
            || args.include_warmup;
        if configured {
            return Err(usage("--replay takes its configuration from the manifest; drop the experiment flags"));
        }
    }
    if args.scheme == Some(SchemeArg::Mrc) {
        if args.rule.is_some() {
            return Err(usage("--rule conflicts with --scheme mrc (MRC is a soft combiner)"));
        }
        if args.majority_l.is_some() {
            return Err(usage("--majority-l conflicts with --scheme mrc"));
        }
    }
    if args.majority_l.is_some() && args.rule.is_some_and(|r| r != RuleArg::Majority) {
        return Err(usage("--majority-l only applies to --rule majority"));
    }
    let swept: &[(&str, bool)] = match args.preset {
        Some(Preset::Fig1) => &[("--history-len", args.history_len.is_some())],
        Some(Preset::Fig2) => &[("--num-crs", args.num_crs.is_some())],
        Some(Preset::Fig3) => &[
            ("--scheme", args.scheme.is_some()),
            ("--rule", args.rule.is_some()),
        ],
        Some(Preset::Fig4) => &[
            ("--scheme", args.scheme.is_some()),
            ("--rule", args.rule.is_some()),
            ("--num-crs", args.num_crs.is_some()),
            ("--majority-l", args.majority_l.is_some()),
        ],
        None => &[],
    };
    if let Some((flag, _)) = swept.iter().find(|(_, set)| *set) {
        let preset = args.preset.expect("swept flags only exist for presets");
        return Err(usage(format!(
            "{flag} conflicts with --preset {}: the preset sweeps or fixes it",
            preset.to_possible_value().expect("no skipped variants").get_name()
        )));
    }
    if args.preset == Some(Preset::Fig3) && args.majority_l.is_none() && args.num_crs.is_some_and(|k| k < 3) {
        return Err(usage("--num-crs must be at least 3 for the fig3 majority rule (l = 3), or set --majority-l"));
    }
    Ok(())
}

fn rule_label(rule: FusionRule) -> String {
    match rule {
        FusionRule::And => "and".into(),
        FusionRule::Or => "or".into(),
        FusionRule::Majority(l) => format!("maj{l}"),
    }
}

fn experiment(
    s: &Settings,
    scheme: SchemeArg,
    rule: RuleArg,
    k: usize,
    history_len: usize,
    suffix: Option<String>,
) -> Result<ExperimentConfig, CliError> {
    let mut scenario = s.scenario.clone();
    scenario.k_crs = k;
    let (scheme, combiner, stem) = match scheme {
        SchemeArg::Mrc => (Scheme::Conventional, Combiner::Mrc, "mrc".to_string()),
        other => {
            let fusion = match rule {
                RuleArg::And => FusionRule::And,
                RuleArg::Or => FusionRule::Or,
                RuleArg::Majority => FusionRule::Majority(s.majority_l.unwrap_or(k.div_ceil(2))),
            };
            if let FusionRule::Majority(l) = fusion {
                if l > k {
                    return Err(usage(format!("invalid value for --majority-l: {l} exceeds --num-crs {k}")));
                }
            }
            let spec = FusionSpec::new(fusion, k).map_err(|e| usage(e.to_string()))?;
            let (scheme, name) = match other {
                SchemeArg::Proposed => (Scheme::Proposed, "proposed"),
                _ => (Scheme::Conventional, "conventional"),
            };
            (scheme, Combiner::Hard(spec), format!("{name}-{}", rule_label(fusion)))
        }
    };
    let label = match suffix {
        Some(x) => format!("{stem}-{x}"),
        None => stem,
    };
    if s.events < history_len {
        return Err(usage(format!(
            "invalid value for --events: {} is below the history length {history_len}",
            s.events
        )));
    }
    let config = ExperimentConfig {
        label,
        scenario,
        scheme,
        combiner,
        history_len,
        pfa_grid: s.grid.clone(),
        n_events: s.events,
        warmup_excluded: s.warmup_excluded,
        variance_source: s.variance,
        energy_model: s.engine,
        theory_active: None,
        theory_rho: None,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(argv: &[&str]) -> Result<RunPlan, CliError> {
        let args = Args::try_parse_from(std::iter::once("css-sim").chain(argv.iter().copied()))
            .map_err(|e| CliError::Usage(e.to_string()))?;
        resolve(&args)
    }

    #[test]
    fn fig3_preset() {
        let plan = parse(&["--preset", "fig3"]).unwrap();
        let labels: Vec<&str> = plan.experiments.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(
            labels,
            [
                "proposed-and",
                "proposed-or",
                "proposed-maj3",
                "conventional-and",
                "conventional-or",
                "conventional-maj3",
                "mrc"
            ]
        );
        for e in &plan.experiments {
            assert_eq!(e.scenario.snr_bar_db, -15.0);
            assert_eq!(e.scenario.n_samples, 1000);
            assert_eq!(e.scenario.k_crs, 7);
            assert_eq!(e.history_len, 15);
            assert_eq!(e.scenario.uncertainty_db, 1.0);
            assert_eq!(e.n_events, DEFAULT_EVENTS);
        }
        assert_eq!(
            plan.experiments[2].combiner,
            Combiner::Hard(FusionSpec::new(FusionRule::Majority(3), 7).unwrap())
        );
        assert_eq!(plan.experiments[6].combiner, Combiner::Mrc);
    }

    #[test]
    fn fig1_and_fig2_presets() {
        let plan = parse(&["--preset", "fig1"]).unwrap();
        let ls: Vec<usize> = plan.experiments.iter().map(|e| e.history_len).collect();
        assert_eq!(ls, [5, 10, 15, 20]);
        for e in &plan.experiments {
            assert_eq!(e.scenario.snr_bar_db, -20.0);
            assert_eq!(e.scenario.k_crs, 3);
            assert_eq!(e.scheme, Scheme::Proposed);
            assert_eq!(e.combiner, Combiner::Hard(FusionSpec::new(FusionRule::Or, 3).unwrap()));
        }
        assert_eq!(plan.experiments[0].label, "proposed-or-l5");

        let plan = parse(&["--preset", "fig2"]).unwrap();
        let ks: Vec<usize> = plan.experiments.iter().map(|e| e.scenario.k_crs).collect();
        assert_eq!(ks, [1, 3, 5, 7]);
        assert!(plan.experiments.iter().all(|e| e.history_len == 15 && e.scenario.snr_bar_db == -20.0));
    }

    #[test]
    fn fig4_preset() {
        let plan = parse(&["--preset", "fig4"]).unwrap();
        assert_eq!(plan.experiments.len(), 3 * FIG4_MAX_CRS);
        assert_eq!(plan.experiments[2].label, "proposed-or-k3");
        assert_eq!(plan.experiments[FIG4_MAX_CRS].label, "conventional-or-k1");
        assert_eq!(plan.experiments[3 * FIG4_MAX_CRS - 1].label, "mrc-k40");
        assert!(plan.experiments.iter().all(|e| e.n_events == FIG4_EVENTS));
    }

    #[test]
    fn overrides_apply_after_preset() {
        let plan = parse(&["--preset", "fig3", "--snr-db", "-10", "--events", "500", "--seed", "9"]).unwrap();
        for e in &plan.experiments {
            assert_eq!(e.scenario.snr_bar_db, -10.0);
            assert_eq!(e.n_events, 500);
            assert_eq!(e.scenario.seed, 9);
            assert_eq!(e.scenario.k_crs, 7);
        }
    }

    #[test]
    fn custom_run_defaults() {
        let plan = parse(&[]).unwrap();
        assert_eq!(plan.experiments.len(), 1);
        let e = &plan.experiments[0];
        assert_eq!(e.label, "proposed-or");
        assert_eq!(e.scenario, ScenarioConfig::default());
        assert_eq!(e.pfa_grid, default_pfa_grid());
        assert_eq!(e.variance_source, VarianceSource::Estimated);
        assert!(e.warmup_excluded);

        let plan = parse(&["--scheme", "mrc", "--num-crs", "4"]).unwrap();
        assert_eq!(plan.experiments[0].label, "mrc");
        let plan = parse(&["--rule", "majority", "--num-crs", "5", "--pfa-grid", "0.01,0.1,0.5"]).unwrap();
        assert_eq!(plan.experiments[0].label, "proposed-maj3");
        assert_eq!(plan.experiments[0].pfa_grid, [0.01, 0.1, 0.5]);
    }

    fn usage_message(argv: &[&str]) -> String {
        match parse(argv) {
            Err(CliError::Usage(m)) => m,
            other => panic!("expected usage error for {argv:?}, got {other:?}"),
        }
    }

    #[test]
    fn invalid_values_name_the_flag() {
        assert!(usage_message(&["--snr-db", "-20", "--num-crs", "0"]).contains("--num-crs"));
        assert!(usage_message(&["--history-len", "1"]).contains("--history-len"));
        assert!(usage_message(&["--duty-cycle", "1.5"]).contains("--duty-cycle"));
        assert!(usage_message(&["--uncertainty-db", "-1"]).contains("--uncertainty-db"));
        assert!(usage_message(&["--pfa-grid", "0.2,0.1"]).contains("--pfa-grid"));
        assert!(usage_message(&["--pfa-grid", "0,0.1"]).contains("--pfa-grid"));
        assert!(usage_message(&["--events", "5"]).contains("--events"));
        assert!(usage_message(&["--rule", "majority", "--majority-l", "4", "--num-crs", "3"]).contains("--majority-l"));
        usage_message(&["--bogus"]);
    }

    #[test]
    fn conflicting_flags() {
        assert!(usage_message(&["--scheme", "mrc", "--rule", "and"]).contains("--rule"));
        assert!(usage_message(&["--rule", "or", "--majority-l", "2"]).contains("--majority-l"));
        assert!(usage_message(&["--preset", "fig1", "--history-len", "7"]).contains("--history-len"));
        assert!(usage_message(&["--preset", "fig2", "--num-crs", "7"]).contains("--num-crs"));
        assert!(usage_message(&["--preset", "fig3", "--scheme", "proposed"]).contains("--scheme"));
        assert!(usage_message(&["--replay", "m.json", "--seed", "3"]).contains("--replay"));
    }
}
