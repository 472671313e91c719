use std::time::Instant;

use coast_core::attribution::{run_attribution, AttributionReport};
use coast_core::data::{load_dataset, standardize_with_params, StateLabel, StatePair};
use coast_core::featsel::run_selection;
use coast_core::graph::{discover_shared_backbone, falsify, Dag};
use coast_core::optimize::{
    persistence, prioritize_and_solve, rank_targets, solve_path, weights_from_attributions, InterventionProblem, PersistenceReport, RegPath,
};
use coast_core::scm::{fit_scm, Scm};
use serde::Serialize;

use crate::config::{GraphSource, RunConfig};
use crate::output::{OutputDir, SeedStream};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Load,
    Select,
    Discover,
    Fit,
    Falsify,
    Attribute,
    Optimize,
    Screen,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Select => "select",
            Stage::Discover => "discover",
            Stage::Fit => "fit",
            Stage::Falsify => "falsify",
            Stage::Attribute => "attribute",
            Stage::Optimize => "optimize",
            Stage::Screen => "screen",
        }
    }
}

/// Stream labels recorded in the manifest; every one derives from the master seed.
pub const SEED_STREAMS: [SeedStream; 5] = [
    SeedStream { stage: "discover", stream: "graph.restart" },
    SeedStream { stage: "attribute", stream: "attribution.permutation" },
    SeedStream { stage: "optimize", stream: "optimize.objective" },
    SeedStream { stage: "optimize", stream: "optimize.transition" },
    SeedStream { stage: "optimize", stream: "optimize.rank" },
];

#[derive(Debug)]
pub struct StageFailure {
    pub stage: Stage,
    pub error: CliError,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageFailure>;
}

impl<T> AtStage<T> for coast_core::Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageFailure> {
        self.map_err(|e| StageFailure { stage, error: CliError::from_core(e) })
    }
}

impl<T> AtStage<T> for Result<T, CliError> {
    fn at(self, stage: Stage) -> Result<T, StageFailure> {
        self.map_err(|error| StageFailure { stage, error })
    }
}

#[derive(Serialize)]
struct FitReport<'a> {
    source_warnings: &'a [String],
    target_warnings: &'a [String],
}

#[derive(Serialize)]
struct RankEntry {
    rank: usize,
    node: String,
    persistence: f64,
    attribution: f64,
}

fn timed<T>(stage: Stage, f: impl FnOnce() -> Result<T, StageFailure>) -> Result<T, StageFailure> {
    let t0 = Instant::now();
    let r = f();
    log::info!("{} finished in {:.2}s", stage.name(), t0.elapsed().as_secs_f64());
    r
}

fn name_edges(dag_names: &[String], pairs: &[[String; 2]]) -> coast_core::Result<Vec<(usize, usize)>> {
    pairs
        .iter()
        .map(|[p, c]| {
            let find = |n: &String| dag_names.iter().position(|x| x == n).ok_or_else(|| coast_core::Error::UnknownFeature(n.clone()));
            Ok((find(p)?, find(c)?))
        })
        .collect()
}

/// Run every stage up to and including `last`, writing artifacts as it goes.
pub fn run(cfg: &RunConfig, last: Stage, out: &mut OutputDir) -> Result<(), StageFailure> {
    let seed = cfg.seed;
    let raw = timed(Stage::Load, || {
        let src = cfg.source.as_ref().expect("validated");
        let tgt = cfg.target.as_ref().expect("validated");
        StatePair::new(load_dataset(src, StateLabel::Source).at(Stage::Load)?, load_dataset(tgt, StateLabel::Target).at(Stage::Load)?).at(Stage::Load)
    })?;

    let pair = timed(Stage::Select, || {
        let selected = if cfg.featsel.enabled {
            let rep = run_selection(&raw, &cfg.featsel.config).at(Stage::Select)?;
            out.write_json("selection.json", "select", &rep).at(Stage::Select)?;
            if !rep.hybrid_scores.is_empty() {
                out.write_text("hybrid_scores.csv", "select", &rep.hybrid_csv()).at(Stage::Select)?;
            }
            let idx = rep.refined_indices();
            if idx.is_empty() {
                return Err(StageFailure { stage: Stage::Select, error: CliError::usage("feature selection kept no features") });
            }
            raw.select_columns(&idx).at(Stage::Select)?
        } else {
            raw.clone()
        };
        let (pair, st) = standardize_with_params(&selected).at(Stage::Select)?;
        out.write_json("standardization.json", "select", &st).at(Stage::Select)?;
        println!("select: {} of {} features kept", pair.p(), raw.p());
        Ok(pair)
    })?;
    if last == Stage::Select {
        return Ok(());
    }

    let names = pair.names().to_vec();
    let dag: Dag = timed(Stage::Discover, || {
        let dag = match cfg.graph.mode {
            GraphSource::Learned => {
                let req = name_edges(&names, &cfg.graph.required).at(Stage::Discover)?;
                let forb = name_edges(&names, &cfg.graph.forbidden).at(Stage::Discover)?;
                let datasets = [pair.source.clone(), pair.target.clone()];
                let (dag, traces) = discover_shared_backbone(&names, &datasets, &req, &forb, &cfg.graph.discovery).at(Stage::Discover)?;
                out.write_json("discovery_traces.json", "discover", &traces).at(Stage::Discover)?;
                dag
            }
            GraphSource::File => Dag::load(cfg.graph.path.as_ref().expect("validated"), &names).at(Stage::Discover)?,
            GraphSource::Oracle => unreachable!("rejected during validation"),
        };
        out.write_text("graph.json", "discover", &(dag.to_json().at(Stage::Discover)? + "\n")).at(Stage::Discover)?;
        out.write_text("graph_edges.csv", "discover", &dag.to_edge_csv()).at(Stage::Discover)?;
        println!("discover: {} nodes, {} edges", dag.len(), dag.edge_count());
        Ok(dag)
    })?;
    if last == Stage::Discover {
        return Ok(());
    }

    let (scm_s, scm_t): (Scm, Scm) = timed(Stage::Fit, || {
        let s = fit_scm(&dag, &pair.source, cfg.scm.noise).at(Stage::Fit)?;
        let t = fit_scm(&dag, &pair.target, cfg.scm.noise).at(Stage::Fit)?;
        out.write_text("scm_source.json", "fit", &(s.to_json().at(Stage::Fit)? + "\n")).at(Stage::Fit)?;
        out.write_text("scm_target.json", "fit", &(t.to_json().at(Stage::Fit)? + "\n")).at(Stage::Fit)?;
        out.write_json("fit_report.json", "fit", &FitReport { source_warnings: s.warnings(), target_warnings: t.warnings() }).at(Stage::Fit)?;
        Ok((s, t))
    })?;
    timed(Stage::Falsify, || {
        let a = cfg.graph.falsify_significance;
        let rs = falsify(&dag, &pair.source, a).at(Stage::Falsify)?;
        let rt = falsify(&dag, &pair.target, a).at(Stage::Falsify)?;
        println!("falsify: {:.3} / {:.3} of implied independencies rejected (source / target)", rs.rejection_fraction, rt.rejection_fraction);
        #[derive(Serialize)]
        struct Both<'a> {
            source: &'a coast_core::graph::FalsificationReport,
            target: &'a coast_core::graph::FalsificationReport,
        }
        out.write_json("falsification.json", "falsify", &Both { source: &rs, target: &rt }).at(Stage::Falsify)
    })?;
    if last == Stage::Fit {
        return Ok(());
    }

    if last == Stage::Screen {
        return screen(cfg, &pair, scm_s, scm_t, out);
    }

    let att: AttributionReport = timed(Stage::Attribute, || {
        let att = run_attribution(&pair, &scm_s, &scm_t, &cfg.attribution, seed).at(Stage::Attribute)?;
        out.write_json("attribution.json", "attribute", &att).at(Stage::Attribute)?;
        out.write_text("psi.csv", "attribute", &att.psi_csv()).at(Stage::Attribute)?;
        println!("attribute: {} shifted nodes, candidates {:?}", att.omega.len(), att.selected_names());
        Ok(att)
    })?;
    if last == Stage::Attribute {
        return Ok(());
    }

    timed(Stage::Optimize, || {
        let cu: Vec<f64> = att.selected.iter().map(|&i| att.u[i]).collect();
        let w = weights_from_attributions(&cu).at(Stage::Optimize)?;
        let mut opt = cfg.optimize.clone();
        opt.seed = seed;
        let mut p = InterventionProblem::from_pair(&pair, scm_s.clone(), scm_t.clone(), att.selected.clone(), w, opt).at(Stage::Optimize)?;
        if let Some(act) = &cfg.actionable {
            let mut nodes = Vec::new();
            for n in act {
                let i = names.iter().position(|x| x == n).ok_or_else(|| coast_core::Error::UnknownFeature(n.clone())).at(Stage::Optimize)?;
                if att.selected.contains(&i) {
                    nodes.push(i);
                }
            }
            if nodes.is_empty() {
                return Err(StageFailure { stage: Stage::Optimize, error: CliError::usage("no actionable node is among the optimization candidates") });
            }
            p = p.with_actionable(&nodes).at(Stage::Optimize)?;
        }
        let grid = p.lambda_grid().at(Stage::Optimize)?;
        let path: RegPath = solve_path(&p, &grid).at(Stage::Optimize)?;
        let pers: PersistenceReport = persistence(&path).at(Stage::Optimize)?;
        let ranking = rank_targets(&pers, &names, &att.u, seed).at(Stage::Optimize)?;
        out.write_json("path.json", "optimize", &path).at(Stage::Optimize)?;
        out.write_text("path_summary.csv", "optimize", &path.summary_csv()).at(Stage::Optimize)?;
        out.write_text("path_heatmap.csv", "optimize", &path.heatmap_csv()).at(Stage::Optimize)?;
        out.write_json("persistence.json", "optimize", &pers).at(Stage::Optimize)?;
        let entries: Vec<RankEntry> = ranking
            .iter()
            .enumerate()
            .map(|(r, &i)| RankEntry { rank: r + 1, node: names[i].clone(), persistence: pers.of_node(&names[i]), attribution: att.u[i] })
            .collect();
        let mut csv = String::from("rank,node,persistence,attribution\n");
        for e in &entries {
            csv.push_str(&format!("{},{},{},{}\n", e.rank, e.node, e.persistence, e.attribution));
        }
        out.write_json("ranking.json", "optimize", &entries).at(Stage::Optimize)?;
        out.write_text("ranking.csv", "optimize", &csv).at(Stage::Optimize)?;
        let top: Vec<&str> = entries.iter().take(5).map(|e| e.node.as_str()).collect();
        println!("optimize: {} path solutions, top targets {:?}", path.solutions.len(), top);
        if let Some(best) = pers.set_persistence.iter().find(|s| !s.set.is_empty()) {
            println!("optimize: most persistent set {:?} ({:.2})", best.set, best.persistence);
        }
        Ok(())
    })?;

    if cfg.screen.is_some() {
        screen(cfg, &pair, scm_s, scm_t, out)?;
    }
    Ok(())
}

fn screen(cfg: &RunConfig, pair: &StatePair, scm_s: Scm, scm_t: Scm, out: &mut OutputDir) -> Result<(), StageFailure> {
    let sc = cfg
        .screen
        .as_ref()
        .ok_or_else(|| CliError::usage("the screen command needs a `screen` section in the config"))
        .at(Stage::Screen)?;
    timed(Stage::Screen, || {
        let names = pair.names();
        let mut z = Vec::new();
        for n in &sc.candidates {
            z.push(names.iter().position(|x| x == n).ok_or_else(|| coast_core::Error::UnknownFeature(n.clone())).at(Stage::Screen)?);
        }
        z.sort_unstable();
        z.dedup();
        let mut opt = cfg.optimize.clone();
        opt.seed = cfg.seed;
        let p = InterventionProblem::from_pair(pair, scm_s, scm_t, z.clone(), vec![1.0; z.len()], opt).at(Stage::Screen)?;
        let two = prioritize_and_solve(&p, &z, sc.k, sc.top_m).at(Stage::Screen)?;
        out.write_json("screening.json", "screen", &two).at(Stage::Screen)?;
        println!("screen: best {:?} with transition {:.2}%", two.best.support_names, two.best.transition_pct);
        Ok(())
    })
}
