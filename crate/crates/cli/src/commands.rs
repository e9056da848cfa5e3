//! The six pipeline commands. Each builds its outputs in memory and hands
//! them to [`Outputs::write`], so a failing command leaves no files behind.

use std::path::{Path, PathBuf};

use featrank::effects::{self, ComplexityConfig};
use featrank::faithfulness::{self, FaithfulnessConfig};
use featrank::metrics::FitStats;
use featrank::rankings::{self, AggregatedRanking};
use featrank::selection::{self, CompareConfig};
use featrank::{Dataset, Error, Predictor, RankingScorecard};
use serde::Serialize;
use serde_json::json;

use crate::config::{seeds, CChoice, EvalSet, RunConfig};
use crate::error::CliError;
use crate::{methods, svg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Rank features with every configured method and aggregate the ranks.
    Rank,
    /// Bootstrap interaction strength and main-effect complexity.
    Complexity,
    /// Manual and L1 feature reduction, then a full vs reduced comparison.
    Select,
    /// Subset-retraining benchmark of the ranking methods.
    Faithfulness,
    /// Top-k versus bottom-k retraining and incremental curves.
    Curves,
    /// Write the synthetic dataset and its ground truth.
    Synth,
}

/// Files produced by a command, held until every one of them is ready.
pub struct Outputs {
    format: Format,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(format: Format) -> Self {
        Outputs { format, files: vec![] }
    }

    fn wants(&self, f: Format) -> bool {
        self.format == Format::All || self.format == f
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        if self.wants(Format::Json) {
            let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
            text.push('\n');
            self.files.push((name.into(), text.into_bytes()));
        }
        Ok(())
    }

    fn csv(&mut self, name: &str, text: String) {
        if self.wants(Format::Csv) {
            self.files.push((name.into(), text.into_bytes()));
        }
    }

    fn svg(&mut self, name: &str, text: String) {
        if self.wants(Format::Svg) {
            self.files.push((name.into(), text.into_bytes()));
        }
    }

    fn always(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.0.as_str()).collect()
    }

    /// Write everything under `dir`; on any failure remove what was written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let fail = |path: &Path, source| CliError::Write {
            path: path.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| fail(dir, e))?;
        let mut written = vec![];
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, bytes) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                let _ = std::fs::remove_file(&path);
                return Err(fail(&path, e));
            }
            written.push(path);
        }
        Ok(written)
    }
}

/// Run `cmd` and return its outputs without touching the file system.
pub fn execute(cmd: Command, cfg: &RunConfig, format: Format) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(format);
    match cmd {
        Command::Rank => rank(cfg, &mut out)?,
        Command::Complexity => complexity(cfg, &mut out)?,
        Command::Select => select(cfg, &mut out)?,
        Command::Faithfulness => faithfulness(cfg, &mut out)?,
        Command::Curves => curves(cfg, &mut out)?,
        Command::Synth => synth(cfg, &mut out)?,
    }
    out.always("resolved_config.toml", cfg.to_toml()?.into_bytes());
    Ok(out)
}

/// Run `cmd` and write its outputs to the configured directory.
pub fn run(cmd: Command, cfg: &RunConfig, format: Format) -> Result<Vec<PathBuf>, CliError> {
    execute(cmd, cfg, format)?.write(&cfg.out)
}

struct Prepared {
    data: Dataset,
    train: Dataset,
    test: Dataset,
    predictor: Predictor,
}

fn prepare(cfg: &RunConfig, split_seed: u64) -> Result<Prepared, CliError> {
    let data = cfg.dataset()?;
    let (train, test) = data.split(cfg.data.test_fraction, split_seed)?;
    log::info!("fitting {} model on {} rows", cfg.model.to_model().kind(), train.n_rows());
    let predictor = cfg.model.to_model().fit(&train)?;
    Ok(Prepared {
        data,
        train,
        test,
        predictor,
    })
}

fn scorecards(cfg: &RunConfig, p: &Prepared) -> Result<Vec<RankingScorecard>, CliError> {
    let eval = match cfg.rank.evaluate_on {
        EvalSet::Train => &p.train,
        EvalSet::Test => &p.test,
    };
    let names = methods::resolve(&cfg.rank, &cfg.model);
    methods::compute_cards(&p.predictor, eval, &names, &cfg.model, &cfg.rank, cfg.root_seed())
}

fn cards_csv(cards: &[RankingScorecard]) -> String {
    let mut s = String::from("method,feature,score,rank\n");
    for c in cards {
        for (j, f) in c.feature_names.iter().enumerate() {
            s.push_str(&format!("{},{},{},{}\n", c.method, f, c.scores[j], c.ranks[j]));
        }
    }
    s
}

fn top_k(k: usize, p: usize) -> usize {
    if k == 0 {
        p
    } else {
        k.min(p)
    }
}

fn rank(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let p = prepare(cfg, seeds::split(cfg.root_seed()))?;
    let cards = scorecards(cfg, &p)?;
    let k = top_k(cfg.rank.top_k, p.data.n_features());
    let agg: Option<AggregatedRanking> = (cards.len() >= 2).then(|| rankings::aggregate(&cards)).transpose()?;
    let uncertainty = agg.as_ref().map(|a| rankings::rank_uncertainty(a, k)).transpose()?;
    let ratio = if cfg.rank.ratio_methods.is_empty() {
        None
    } else if cards.len() < 4 {
        return Err(CliError::Config("rank.ratio_methods needs at least four ranking methods".into()));
    } else {
        ratio_or_none(rankings::uncertainty_ratio(&cards, &cfg.rank.ratio_methods, k))?
    };
    out.json(
        "rank.json",
        &json!({
            "command": "rank",
            "seed": cfg.root_seed(),
            "model": cfg.model.to_model().kind(),
            "top_k": k,
            "scorecards": cards,
            "aggregated": agg,
            "rank_uncertainty": uncertainty,
            "uncertainty_ratio": ratio,
        }),
    )?;
    out.csv("scorecards.csv", cards_csv(&cards));
    if let Some(a) = &agg {
        out.csv("aggregated.csv", a.to_csv());
        out.svg("rank.svg", svg::ranked_bars(a, "Median rank across methods"));
    }
    Ok(())
}

fn ratio_or_none(r: featrank::Result<f64>) -> Result<Option<f64>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::DegenerateAgreement) => {
            log::warn!("all methods agree; the uncertainty ratio is undefined");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn complexity(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let p = prepare(cfg, seeds::split(cfg.root_seed()))?;
    let c = &cfg.complexity;
    let cc = ComplexityConfig {
        n_boot: c.n_boot,
        n_bins: c.n_bins,
        epsilon: c.epsilon,
        seed: seeds::complexity(cfg.root_seed()),
    };
    let report = effects::complexity_report(&p.predictor, &p.train, &cc)?;
    let curves = effects::compute_all_ale(&p.predictor, &p.train, c.n_bins)?;
    out.json(
        "complexity.json",
        &json!({
            "command": "complexity",
            "seed": cfg.root_seed(),
            "model": cfg.model.to_model().kind(),
            "report": report,
            "ale": curves,
        }),
    )?;
    let mut ale = String::from("feature,bin_center,value\n");
    for curve in &curves {
        for (x, v) in curve.bin_centers.iter().zip(&curve.values) {
            ale.push_str(&format!("{},{x},{v}\n", curve.feature));
        }
    }
    out.csv("ale.csv", ale);
    let mut mec = String::from("feature,mean_segments\n");
    for (f, v) in &report.per_feature_mec {
        mec.push_str(&format!("{f},{v}\n"));
    }
    out.csv("mec.csv", mec);
    let series: Vec<(String, Vec<(f64, f64)>)> = curves
        .iter()
        .map(|c| (c.feature.clone(), c.bin_centers.iter().copied().zip(c.values.iter().copied()).collect()))
        .collect();
    let title = format!("IAS {:.3} ± {:.3}, MEC {:.2} ± {:.2}", report.ias_mean, report.ias_sd, report.mec_mean, report.mec_sd);
    out.svg("ale.svg", svg::single(svg::lines(&series, &title, "feature value", "ALE")));
    Ok(())
}

fn select(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let data = cfg.dataset()?;
    let s = &cfg.select;
    let seed = seeds::select(cfg.root_seed());
    let mut tuning = None;
    let c = match &s.c {
        None => None,
        Some(CChoice::Value(v)) => Some(*v),
        Some(CChoice::Named(_)) => {
            let filtered = selection::manual_filter(&data, &s.manual_drop)?;
            let t = selection::tune_l1_c(&filtered, &s.c_grid, s.cutoff, cfg.data.test_fraction, s.tolerance, seed)?;
            let c = t.c;
            tuning = Some(t);
            Some(c)
        }
    };
    let model = cfg.model.to_model();
    let reduced_model = s.reduced_model.as_ref().map(|m| m.to_model()).unwrap_or_else(|| model.clone());
    let compare = CompareConfig {
        n_boot: s.n_boot,
        test_fraction: cfg.data.test_fraction,
        complexity: s.with_complexity.then(|| ComplexityConfig {
            n_boot: cfg.complexity.n_boot,
            n_bins: cfg.complexity.n_bins,
            epsilon: cfg.complexity.epsilon,
            seed: seeds::complexity(cfg.root_seed()),
        }),
        seed,
    };
    let report = selection::run_selection(&data, &s.manual_drop, c, s.cutoff, &model, &reduced_model, &compare)?;
    out.json(
        "select.json",
        &json!({
            "command": "select",
            "seed": cfg.root_seed(),
            "n_dropped": report.dropped_manual.len() + report.dropped_l1.len(),
            "report": report,
            "tuning": tuning,
        }),
    )?;
    let cmp = &report.comparison;
    let rows = [
        ("naupdc", cmp.before.naupdc, cmp.after.naupdc),
        ("ncsi", cmp.before.ncsi, cmp.after.ncsi),
        ("auc", cmp.before.auc, cmp.after.auc),
        ("bss", cmp.before.bss, cmp.after.bss),
    ];
    let mut table = String::from("metric,full,reduced\n");
    for (m, b, a) in rows {
        table.push_str(&format!("{m},{b},{a}\n"));
    }
    if let (Some(b), Some(a)) = (&cmp.before_complexity, &cmp.after_complexity) {
        table.push_str(&format!("ias,{},{}\nmec,{},{}\n", b.ias_mean, a.ias_mean, b.mec_mean, a.mec_mean));
    }
    out.csv("select.csv", table);
    let mut labels = vec![];
    let mut values = vec![];
    for (m, b, a) in rows {
        labels.push(format!("{m} full"));
        values.push(b);
        labels.push(format!("{m} red."));
        values.push(a);
    }
    let mut panels = vec![svg::bars(&labels, &values, None, "Test-set skill, full vs reduced", "score")];
    if let (Some(b), Some(a)) = (&cmp.before_complexity, &cmp.after_complexity) {
        let l = ["IAS full", "IAS red.", "MEC full", "MEC red."].map(String::from);
        let ci = [
            (b.ias_mean - b.ias_sd, b.ias_mean + b.ias_sd),
            (a.ias_mean - a.ias_sd, a.ias_mean + a.ias_sd),
            (b.mec_mean - b.mec_sd, b.mec_mean + b.mec_sd),
            (a.mec_mean - a.mec_sd, a.mec_mean + a.mec_sd),
        ];
        panels.push(svg::bars(&l, &[b.ias_mean, a.ias_mean, b.mec_mean, a.mec_mean], Some(&ci), "Complexity (± 1 sd)", "value"));
    }
    out.svg("select.svg", svg::grid(&panels, 2));
    Ok(())
}

/// The three methods with the highest R², ties broken by name.
fn best_three(stats: &std::collections::BTreeMap<String, FitStats>) -> Vec<String> {
    let mut v: Vec<(&String, f64)> = stats.iter().map(|(k, s)| (k, s.r2)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    v.into_iter().take(3).map(|x| x.0.clone()).collect()
}

fn faithfulness(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let seed = seeds::experiment(cfg.root_seed());
    // rankings come from a model trained on the benchmark's own training split
    let p = prepare(cfg, seed)?;
    let cards = scorecards(cfg, &p)?;
    let f = &cfg.faithfulness;
    let fc = FaithfulnessConfig {
        n_subsets: f.n_subsets,
        metric: f.metric,
        test_fraction: cfg.data.test_fraction,
        degree: f.degree,
        n_boot: f.n_boot,
        max_failure_rate: f.max_failure_rate,
        seed,
    };
    let report = faithfulness::run_experiment(&p.data, &cfg.model.to_model(), &cards, &fc)?;
    let pareto = faithfulness::pareto_curve(&report);
    let k = top_k(cfg.rank.top_k, p.data.n_features());
    let chosen = best_three(&report.fit_stats);
    let ratio = if cards.len() >= 4 && chosen.len() == 3 {
        ratio_or_none(rankings::uncertainty_ratio(&cards, &chosen, k))?
    } else {
        None
    };
    out.json(
        "faithfulness.json",
        &json!({
            "command": "faithfulness",
            "seed": cfg.root_seed(),
            "scorecards": cards,
            "report": report,
            "pareto": pareto,
            "most_faithful": chosen,
            "uncertainty_ratio": ratio,
        }),
    )?;
    out.csv("records.csv", report.records_csv());
    let mut fs = String::from("method,kendall_tau,log_pearson,r2,mse,n\n");
    for (m, s) in &report.fit_stats {
        fs.push_str(&format!("{m},{},{},{},{},{}\n", s.kendall_tau, s.log_pearson, s.r2, s.mse, s.n));
    }
    out.csv("fit_stats.csv", fs);
    let mut pc = String::from("subset_size,count,mean,p10,p90\n");
    for q in &pareto {
        pc.push_str(&format!("{},{},{},{},{}\n", q.subset_size, q.count, q.mean, q.p10, q.p90));
    }
    out.csv("pareto.csv", pc);

    let perf = report.performance();
    let panels: Vec<String> = report
        .methods
        .iter()
        .map(|m| {
            let title = match report.fit_stats.get(m) {
                Some(s) => format!("{m}: R² {:.2}, τ {:.2}", s.r2, s.kendall_tau),
                None => format!("{m}: degenerate"),
            };
            svg::hexbin(&report.scaled(m), &perf, &title, "scaled total importance", f.metric.name())
        })
        .collect();
    out.svg("faithfulness.svg", svg::grid(&panels, 3));
    let line = |sel: fn(&faithfulness::ParetoPoint) -> f64| pareto.iter().map(|q| (q.subset_size as f64, sel(q))).collect();
    let series = vec![
        ("mean".to_string(), line(|q| q.mean)),
        ("10th pct".to_string(), line(|q| q.p10)),
        ("90th pct".to_string(), line(|q| q.p90)),
    ];
    out.svg("pareto.svg", svg::single(svg::lines(&series, "Performance vs subset size", "subset size", f.metric.name())));
    if let Some(r) = ratio {
        let label = chosen.join("+");
        out.svg("ratio.svg", svg::single(svg::bars(&[label], &[r], None, "Uncertainty ratio of the most faithful methods", "ratio")));
    }
    Ok(())
}

fn curves(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let p = prepare(cfg, seeds::split(cfg.root_seed()))?;
    let cards = scorecards(cfg, &p)?;
    let nf = p.data.n_features();
    let c = &cfg.curves;
    let k = if c.k == 0 { (nf / 5).max(1) } else { c.k.min(nf) };
    let k_max = top_k(c.k_max, nf);
    let model = cfg.model.to_model();
    let seed = seeds::curves(cfg.root_seed());
    let tb = cards
        .iter()
        .map(|card| faithfulness::topk_bottomk(&p.train, &model, card, k, c.metric, c.n_boot, seed))
        .collect::<featrank::Result<Vec<_>>>()?;
    let inc = cards
        .iter()
        .map(|card| faithfulness::incremental_curves(&p.train, &model, card, k_max, c.metric))
        .collect::<featrank::Result<Vec<_>>>()?;
    out.json(
        "curves.json",
        &json!({
            "command": "curves",
            "seed": cfg.root_seed(),
            "metric": c.metric,
            "top_bottom": tb,
            "incremental": inc,
        }),
    )?;
    let mut t = String::from("method,k,top_score,bottom_score,delta,ci_low,ci_high\n");
    for r in &tb {
        t.push_str(&format!("{},{},{},{},{},{},{}\n", r.method, r.k, r.top_score, r.bottom_score, r.delta, r.ci.0, r.ci.1));
    }
    out.csv("topk.csv", t);
    let mut s = String::from("method,n_features,best,worst\n");
    for r in &inc {
        for (i, (b, w)) in r.best.iter().zip(&r.worst).enumerate() {
            s.push_str(&format!("{},{},{b},{w}\n", r.method, i + 1));
        }
    }
    out.csv("incremental.csv", s);
    let labels: Vec<String> = tb.iter().map(|r| r.method.clone()).collect();
    let deltas: Vec<f64> = tb.iter().map(|r| r.delta).collect();
    let cis: Vec<(f64, f64)> = tb.iter().map(|r| r.ci).collect();
    out.svg(
        "topk.svg",
        svg::single(svg::bars(&labels, &deltas, Some(&cis), &format!("Top-{k} minus bottom-{k} {}", c.metric), "difference")),
    );
    let panels: Vec<String> = inc
        .iter()
        .map(|r| {
            let pts = |v: &[f64]| v.iter().enumerate().map(|(i, y)| ((i + 1) as f64, *y)).collect();
            let series = vec![("best first".to_string(), pts(&r.best)), ("worst first".to_string(), pts(&r.worst))];
            svg::lines(&series, &r.method, "features used", c.metric.name())
        })
        .collect();
    out.svg("incremental.svg", svg::grid(&panels, 3));
    Ok(())
}

fn synth(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let section = cfg
        .data
        .synthetic
        .as_ref()
        .ok_or_else(|| CliError::Config("synth needs a [data.synthetic] section".into()))?;
    let generated = section.to_spec().generate()?;
    let mut csv = vec![];
    generated.dataset.write_csv(&mut csv, &cfg.data.target)?;
    out.always("synthetic.csv", csv);
    let truth = json!({
        "spec": generated.spec,
        "weights": generated.dataset.feature_names().iter().cloned().zip(generated.weights.iter().copied()).collect::<Vec<_>>(),
        "base_rate": generated.dataset.base_rate(),
    });
    let mut text = serde_json::to_string_pretty(&truth).map_err(Error::from)?;
    text.push('\n');
    out.always("ground_truth.json", text.into_bytes());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_write_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::new(Format::All);
        o.always("a.txt", b"a".to_vec());
        o.always("missing/b.txt", b"b".to_vec());
        assert!(o.write(dir.path()).is_err());
        assert!(!dir.path().join("a.txt").exists());
    }

    #[test]
    fn format_filter() {
        let mut o = Outputs::new(Format::Csv);
        o.csv("x.csv", String::new());
        o.svg("x.svg", String::new());
        o.json("x.json", &1).unwrap();
        assert_eq!(o.names(), vec!["x.csv"]);
    }
}
