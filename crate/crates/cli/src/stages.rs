use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use log::info;
use tage_core::checkpoint::{
    encoder_checkpoint, encoder_from_checkpoint, explainer_checkpoint, explainer_from_checkpoint, head_checkpoint,
    head_from_checkpoint, Checkpoint,
};
use tage_core::encoder::{
    pretrain_gae, pretrain_grace_lite, train_downstream, train_supervised, DownstreamHead, Encoder, EncoderKind,
    EncoderSpec, GaeConfig, GraceConfig, HeadConfig, Pooling, SupervisedConfig, TaskLevel,
};
use tage_core::evaluation::{
    explain_graphs_for_head, explain_nodes_for_head, fidelity_at_sparsity, metrics_csv, multitask_report,
    pooled_edge_auc, random_edge_scores, rescored, saliency_edge_scores, sweep_curve, ClassRule,
    ExplanationInstance, MetricPoint, Model,
};
use tage_core::explainer::{
    downstream_condition, explain_graph, explain_node, one_hot_condition, target_embedding, ConditionNorm,
    ConditionVector, EmbeddingExplainer, ExplainerMode,
};
use tage_core::graph::{
    generate_ba_shapes, generate_motif_multitask, read_container, write_container, BaShapesConfig, Dataset,
    FeatureMode, Graph, MotifKind, MultitaskConfig, Split,
};
use tage_core::objectives::{train_embedding_explainer, ExplainerTrainConfig, LossKind, Reduction};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Node,
    Graph,
}

/// How `explain` builds its condition vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionSpec {
    OneHot(usize),
    Downstream(usize),
    Uniform,
}

impl ConditionSpec {
    pub fn parse(s: &str) -> CliResult<Self> {
        let bad = || CliError::Config(format!("bad condition `{s}` (one-hot:K, downstream:T or uniform)"));
        if s == "uniform" {
            return Ok(Self::Uniform);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = arg.parse().map_err(|_| bad())?;
        match kind {
            "one-hot" => Ok(Self::OneHot(n)),
            "downstream" => Ok(Self::Downstream(n)),
            _ => Err(bad()),
        }
    }
}

pub struct Stage {
    cfg: RunConfig,
    out: PathBuf,
    hash: String,
    seed: u64,
}

const DATA_FILE: &str = "data.txt";
const ENCODER_FILE: &str = "encoder.ckpt";
const EXPLAINER_FILE: &str = "explainer.ckpt";

fn head_file(task: usize) -> String {
    format!("head.task{task}.ckpt")
}

fn parse_enum<T>(cfg: &RunConfig, key: &str, parse: impl Fn(&str) -> Option<T>) -> CliResult<T> {
    parse(cfg.get(key)).ok_or_else(|| CliError::Config(format!("`{key}`: unknown value `{}`", cfg.get(key))))
}

impl Stage {
    pub fn new(cfg: RunConfig) -> CliResult<Self> {
        cfg.validate()?;
        let out = cfg.out_dir();
        fs::create_dir_all(&out)?;
        Ok(Self {
            hash: cfg.hash(),
            seed: cfg.seed()?,
            out,
            cfg,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn stamp(&self) -> String {
        format!("# config_hash={} seed={}\n", self.hash, self.seed)
    }

    fn write_stamped(&self, name: &str, body: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        fs::write(&path, format!("{}{body}", self.stamp()))?;
        info!("wrote {}", path.display());
        Ok(path)
    }

    fn save(&self, name: &str, ck: Checkpoint) -> CliResult<()> {
        let ck = ck.with_meta("config_hash", &self.hash).with_meta("seed", self.seed);
        let path = self.path(name);
        ck.save(&path)?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn load(&self, name: &str, produced_by: &str) -> CliResult<Checkpoint> {
        let path = self.path(name);
        if !path.exists() {
            return Err(CliError::Missing(format!(
                "{} not found; run `tage {produced_by}` first",
                path.display()
            )));
        }
        Ok(Checkpoint::load(&path)?)
    }

    fn encoder(&self) -> CliResult<Encoder> {
        Ok(encoder_from_checkpoint(&self.load(ENCODER_FILE, "pretrain")?)?)
    }

    fn head(&self, task: usize) -> CliResult<DownstreamHead> {
        Ok(head_from_checkpoint(&self.load(&head_file(task), "train-downstream")?)?)
    }

    fn explainer(&self) -> CliResult<EmbeddingExplainer> {
        Ok(explainer_from_checkpoint(&self.load(EXPLAINER_FILE, "train-explainer")?)?)
    }

    fn data_path(&self) -> PathBuf {
        if self.cfg.is_set("data.path") {
            PathBuf::from(self.cfg.get("data.path"))
        } else {
            self.path(DATA_FILE)
        }
    }

    fn dataset(&self) -> CliResult<Dataset> {
        let path = self.data_path();
        if !path.exists() {
            return Err(CliError::Missing(format!(
                "{} not found; run `tage gen-data` first",
                path.display()
            )));
        }
        Ok(read_container(&path)?)
    }

    pub fn gen_data(&self) -> CliResult<()> {
        let c = &self.cfg;
        let ds = match c.get("data.kind") {
            "ba-shapes" => {
                let bc = BaShapesConfig {
                    base_nodes: c.parse("ba.base_nodes")?,
                    attach_edges: c.parse("ba.attach_edges")?,
                    houses: c.parse("ba.houses")?,
                    perturbation: c.parse("ba.perturbation")?,
                    features: FeatureMode::Ones(c.parse("ba.feature_width")?),
                };
                Dataset::single(generate_ba_shapes(&bc, self.seed)?, 1)
            }
            "multitask" => {
                let motifs = c
                    .list::<String>("mt.motifs")?
                    .iter()
                    .map(|m| MotifKind::parse(m).ok_or_else(|| CliError::Config(format!("unknown motif `{m}`"))))
                    .collect::<CliResult<Vec<_>>>()?;
                let mc = MultitaskConfig {
                    num_graphs: c.parse("mt.num_graphs")?,
                    backbone_min: c.parse("mt.backbone_min")?,
                    backbone_max: c.parse("mt.backbone_max")?,
                    motifs,
                    motif_probability: c.parse("mt.motif_probability")?,
                    features: FeatureMode::DegreeOneHot(c.parse("mt.degree_buckets")?),
                    train_fraction: c.parse("mt.train_fraction")?,
                    val_fraction: c.parse("mt.val_fraction")?,
                    ..MultitaskConfig::default()
                };
                generate_motif_multitask(&mc, self.seed)?
            }
            other => return Err(CliError::Config(format!("`data.kind`: unknown value `{other}`"))),
        };
        let path = self.path(DATA_FILE);
        write_container(&ds, &path)?;
        self.write_stamped(&format!("{DATA_FILE}.stamp"), "")?;
        info!("wrote {} ({} graphs)", path.display(), ds.len());
        Ok(())
    }

    fn level(ds: &Dataset) -> Level {
        let node_labelled = ds.len() == 1 && ds.graphs()[0].node_labels().is_some();
        if node_labelled {
            Level::Node
        } else {
            Level::Graph
        }
    }

    fn encoder_spec(&self, ds: &Dataset) -> CliResult<EncoderSpec> {
        let kind = parse_enum(&self.cfg, "encoder.kind", EncoderKind::parse)?;
        let mut dims = vec![ds.feature_dim()];
        dims.extend(self.cfg.list::<usize>("encoder.hidden")?);
        let pooling = match Self::level(ds) {
            Level::Node => Pooling::None,
            Level::Graph => Pooling::Mean,
        };
        Ok(EncoderSpec { kind, dims, pooling })
    }

    pub fn pretrain(&self) -> CliResult<()> {
        let ds = self.dataset()?;
        let spec = self.encoder_spec(&ds)?;
        let c = &self.cfg;
        let lr: f64 = c.parse("pretrain.lr")?;
        let epochs: Option<usize> = c.parse_opt("pretrain.epochs")?;
        let (encoder, column, trace) = match c.get("pretrain.route") {
            "gae" => {
                let gc = GaeConfig {
                    epochs: epochs.unwrap_or(GaeConfig::default().epochs),
                    lr,
                };
                let p = pretrain_gae(&ds, &spec, &gc, self.seed)?;
                (p.encoder, "loss", p.losses)
            }
            "grace-lite" => {
                let gc = GraceConfig {
                    epochs: epochs.unwrap_or(GraceConfig::default().epochs),
                    lr,
                    edge_drop: c.parse("grace.edge_drop")?,
                    feature_mask: c.parse("grace.feature_mask")?,
                    temperature: c.parse("grace.temperature")?,
                    batch_graphs: c.parse("grace.batch_graphs")?,
                };
                let p = pretrain_grace_lite(&ds, &spec, &gc, self.seed)?;
                (p.encoder, "loss", p.losses)
            }
            "supervised" => {
                let (level, task) = match Self::level(&ds) {
                    Level::Node => (TaskLevel::Node, 0),
                    Level::Graph => {
                        let task = c.parse("supervised.task")?;
                        (TaskLevel::Graph { task }, task)
                    }
                };
                let sc = SupervisedConfig {
                    level,
                    epochs: epochs.unwrap_or(SupervisedConfig::default().epochs),
                    lr,
                    head_hidden: c.parse("supervised.head_hidden")?,
                    train_fraction: c.parse("supervised.train_fraction")?,
                };
                let s = train_supervised(&ds, &spec, &sc, self.seed)?;
                let acc = s.accuracy.last().copied().unwrap_or(0.0);
                info!("supervised training accuracy {acc:.4}");
                self.save(
                    &head_file(task),
                    head_checkpoint(&s.head).with_meta("train_accuracy", format!("{acc:?}")),
                )?;
                (s.encoder, "train_accuracy", s.accuracy)
            }
            other => return Err(CliError::Config(format!("`pretrain.route`: unknown value `{other}`"))),
        };
        let mut log = format!("epoch,{column}\n");
        for (i, v) in trace.iter().enumerate() {
            let _ = writeln!(log, "{i},{v}");
        }
        self.write_stamped("pretrain_log.csv", &log)?;
        self.save(ENCODER_FILE, encoder_checkpoint(&encoder).with_meta("route", c.get("pretrain.route")))
    }

    fn all_tasks(ds: &Dataset) -> Vec<usize> {
        (0..ds.num_tasks().max(1)).collect()
    }

    fn eval_tasks(&self, ds: &Dataset) -> CliResult<Vec<usize>> {
        let tasks: Vec<usize> = self.cfg.list("eval.tasks")?;
        if tasks.is_empty() {
            return Ok(Self::all_tasks(ds));
        }
        if let Some(t) = tasks.iter().find(|&&t| t >= ds.num_tasks().max(1)) {
            return Err(CliError::Config(format!("task {t} outside the dataset's tasks")));
        }
        Ok(tasks)
    }

    /// Training rows (embeddings) and labels for one task's head.
    fn head_data(&self, encoder: &Encoder, ds: &Dataset, task: usize) -> CliResult<(diffnum::Tensor, Vec<usize>)> {
        match Self::level(ds) {
            Level::Node => {
                let g = &ds.graphs()[0];
                let labels = g
                    .node_labels()
                    .ok_or_else(|| CliError::Config("dataset has no node labels".into()))?
                    .to_vec();
                Ok((encoder.encode_nodes(g, None)?, labels))
            }
            Level::Graph => {
                let mut idx = ds.indices(Split::Train);
                if idx.is_empty() {
                    idx = (0..ds.len()).collect();
                }
                let graphs: Vec<&Graph> = idx.iter().map(|&i| &ds.graphs()[i]).collect();
                let labels = graphs
                    .iter()
                    .map(|g| {
                        g.graph_labels()
                            .and_then(|l| l.get(task).copied())
                            .ok_or_else(|| CliError::Config(format!("graph without a label for task {task}")))
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                Ok((encoder.encode_graphs(&graphs)?, labels))
            }
        }
    }

    pub fn train_downstream(&self, task: Option<usize>) -> CliResult<()> {
        let ds = self.dataset()?;
        let encoder = self.encoder()?;
        let tasks = match task {
            Some(t) if t >= ds.num_tasks().max(1) => {
                return Err(CliError::Config(format!("task {t} outside the dataset's tasks")))
            }
            Some(t) => vec![t],
            None => Self::all_tasks(&ds),
        };
        let hc = HeadConfig {
            hidden: self.cfg.parse("downstream.hidden")?,
            epochs: self.cfg.parse("downstream.epochs")?,
            lr: self.cfg.parse("downstream.lr")?,
            classes: None,
        };
        for t in tasks {
            let (x, labels) = self.head_data(&encoder, &ds, t)?;
            let (head, trace) = train_downstream(&x, &labels, &hc, self.seed.wrapping_add(t as u64))?;
            let acc = trace.last().copied().unwrap_or(0.0);
            info!("task {t}: head training accuracy {acc:.4}");
            let mut log = String::from("epoch,train_accuracy\n");
            for (i, v) in trace.iter().enumerate() {
                let _ = writeln!(log, "{i},{v}");
            }
            self.write_stamped(&format!("downstream_log.task{t}.csv"), &log)?;
            self.save(
                &head_file(t),
                head_checkpoint(&head)
                    .with_meta("task", t)
                    .with_meta("train_accuracy", format!("{acc:?}")),
            )?;
        }
        Ok(())
    }

    pub fn explainer_config(&self, level: Level) -> CliResult<ExplainerTrainConfig> {
        let c = &self.cfg;
        let mut e = match c.get("explainer.preset") {
            "auto" => match level {
                Level::Graph => ExplainerTrainConfig::graph_preset(),
                Level::Node => ExplainerTrainConfig::node_preset(),
            },
            "graph" => ExplainerTrainConfig::graph_preset(),
            "node" => ExplainerTrainConfig::node_preset(),
            "infonce" => ExplainerTrainConfig::infonce_preset(),
            other => return Err(CliError::Config(format!("`explainer.preset`: unknown value `{other}`"))),
        };
        if c.is_set("explainer.loss") {
            e.loss = parse_enum(c, "explainer.loss", LossKind::parse)?;
        }
        if let Some(v) = c.parse_opt("explainer.lr")? {
            e.lr = v;
        }
        if let Some(v) = c.parse_opt("explainer.batch_size")? {
            e.batch_size = v;
        }
        if let Some(v) = c.parse_opt("explainer.epochs")? {
            e.epochs = v;
        }
        if let Some(v) = c.parse_opt("explainer.laplace_scale")? {
            e.laplace_scale = v;
        }
        if let Some(v) = c.parse_opt("explainer.size")? {
            e.reg.size = v;
        }
        if let Some(v) = c.parse_opt("explainer.entropy")? {
            e.reg.entropy = v;
        }
        if c.is_set("explainer.reduction") {
            e.reg.reduction = parse_enum(c, "explainer.reduction", Reduction::parse)?;
        }
        if let Some(v) = c.parse_opt("explainer.hidden")? {
            e.hidden = Some(v);
        }
        if let Some(v) = c.parse_opt("explainer.per_sample")? {
            e.per_sample_condition = v;
        }
        if let Some(v) = c.parse_opt("explainer.max_steps")? {
            e.max_steps = Some(v);
        }
        e.validate()?;
        Ok(e)
    }

    fn mode(level: Level) -> ExplainerMode {
        match level {
            Level::Graph => ExplainerMode::Graph,
            Level::Node => ExplainerMode::Node,
        }
    }

    /// Needs only the encoder: no head is read.
    pub fn train_explainer(&self) -> CliResult<()> {
        let ds = self.dataset()?;
        let encoder = self.encoder()?;
        let level = Self::level(&ds);
        let ec = self.explainer_config(level)?;
        let trained = train_embedding_explainer(&encoder, &ds, Self::mode(level), &ec, self.seed)?;
        info!("explainer trained for {} steps", trained.log.len());
        self.write_stamped("explainer_log.csv", &trained.log_csv())?;
        self.save(EXPLAINER_FILE, explainer_checkpoint(&trained.explainer))
    }

    pub fn explain(&self, condition: ConditionSpec, graph: usize, target: Option<usize>) -> CliResult<String> {
        let ds = self.dataset()?;
        let encoder = self.encoder()?;
        let explainer = self.explainer()?;
        let g = ds
            .graphs()
            .get(graph)
            .ok_or_else(|| CliError::Config(format!("graph {graph} outside the dataset")))?;
        let level = Self::level(&ds);
        let target = match (level, target) {
            (Level::Node, None) => return Err(CliError::Config("node-level data needs --target".into())),
            (Level::Node, Some(t)) if t >= g.num_nodes() => {
                return Err(CliError::Config(format!("target {t} outside graph {graph}")))
            }
            (Level::Graph, Some(_)) => return Err(CliError::Config("--target applies to node-level data".into())),
            (_, t) => t,
        };
        let d = encoder.embed_dim();
        let p = match condition {
            ConditionSpec::OneHot(k) => one_hot_condition(k, d)?,
            ConditionSpec::Uniform => ConditionVector::uniform(d),
            ConditionSpec::Downstream(task) => {
                let head = self.head(task)?;
                let norm = parse_enum(&self.cfg, "eval.condition_norm", ConditionNorm::parse)?;
                let z = match target {
                    Some(t) => target_embedding(&encoder, g, t)?,
                    None => encoder.encode_graph(g, None)?,
                };
                downstream_condition(&head, &z, norm)?
            }
        };
        let (edges, scores): (Vec<usize>, Vec<f64>) = match target {
            None => (
                (0..g.num_edges()).collect(),
                explain_graph(&encoder, &explainer, g, &p)?.values,
            ),
            Some(t) => {
                let ex = explain_node(&encoder, &explainer, g, t, &p)?;
                (ex.subgraph.edges, ex.scores.values)
            }
        };
        let mut body = String::from("edge,u,v,score\n");
        for (&e, s) in edges.iter().zip(&scores) {
            let (u, v) = g.edges()[e];
            let _ = writeln!(body, "{e},{u},{v},{s}");
        }
        self.write_stamped("explain.csv", &body)?;
        Ok(body)
    }

    fn eval_graphs<'a>(&self, ds: &'a Dataset) -> CliResult<Vec<&'a Graph>> {
        let split = parse_enum(&self.cfg, "eval.split", Split::parse)?;
        let mut idx = ds.indices(split);
        if idx.is_empty() {
            idx = (0..ds.len()).collect();
        }
        let cap: usize = self.cfg.parse("eval.max_instances")?;
        if cap > 0 {
            idx.truncate(cap);
        }
        Ok(idx.into_iter().map(|i| &ds.graphs()[i]).collect())
    }

    fn eval_targets(&self, g: &Graph) -> CliResult<Vec<usize>> {
        let mut targets: Vec<usize> = self.cfg.list("eval.targets")?;
        if targets.is_empty() {
            let labels = g
                .node_labels()
                .ok_or_else(|| CliError::Config("no eval.targets and no node labels".into()))?;
            targets = (0..g.num_nodes()).filter(|&v| labels[v] != 0).collect();
        }
        if let Some(t) = targets.iter().find(|&&t| t >= g.num_nodes()) {
            return Err(CliError::Config(format!("target {t} outside the graph")));
        }
        let cap: usize = self.cfg.parse("eval.max_instances")?;
        if cap > 0 {
            targets.truncate(cap);
        }
        Ok(targets)
    }

    fn instances(
        &self,
        ds: &Dataset,
        encoder: &Encoder,
        explainer: &EmbeddingExplainer,
        head: &DownstreamHead,
        task: usize,
    ) -> CliResult<Vec<ExplanationInstance>> {
        let norm = parse_enum(&self.cfg, "eval.condition_norm", ConditionNorm::parse)?;
        Ok(match Self::level(ds) {
            Level::Graph => explain_graphs_for_head(encoder, explainer, head, &self.eval_graphs(ds)?, Some(task), norm)?,
            Level::Node => {
                let g = &ds.graphs()[0];
                explain_nodes_for_head(encoder, explainer, head, g, &self.eval_targets(g)?, Some(task), norm)?
            }
        })
    }

    /// The explainer's instances plus the random and saliency baselines on the
    /// same graphs.
    fn methods(&self, model: &Model, tage: Vec<ExplanationInstance>) -> CliResult<Vec<(&'static str, Vec<ExplanationInstance>)>> {
        let seed = self.seed;
        let random = rescored(&tage, |i, inst| {
            Ok(random_edge_scores(
                inst.scores.len(),
                seed.wrapping_mul(0x9e37_79b9).wrapping_add(i as u64),
            ))
        })?;
        let saliency = rescored(&tage, |_, inst| saliency_edge_scores(model, &inst.graph, inst.target))?;
        Ok(vec![("tage", tage), ("random", random), ("saliency", saliency)])
    }

    fn rule(&self) -> CliResult<ClassRule> {
        parse_enum(&self.cfg, "eval.class_rule", ClassRule::parse)
    }

    /// Runs `per_method` for every task and method; returns CSV rows.
    fn over_tasks(
        &self,
        mut per_method: impl FnMut(&Model, &[ExplanationInstance]) -> CliResult<Vec<MetricPoint>>,
    ) -> CliResult<Vec<(String, String, MetricPoint, Option<f64>)>> {
        let ds = self.dataset()?;
        let encoder = self.encoder()?;
        let explainer = self.explainer()?;
        let mut rows = Vec::new();
        for task in self.eval_tasks(&ds)? {
            let head = self.head(task)?;
            let model = Model::new(&encoder, &head)?;
            let inst = self.instances(&ds, &encoder, &explainer, &head, task)?;
            if inst.is_empty() {
                return Err(CliError::Config(format!("task {task}: nothing to evaluate")));
            }
            for (method, inst) in self.methods(&model, inst)? {
                let auc = instance_auc(&inst);
                for point in per_method(&model, &inst)? {
                    rows.push((task.to_string(), method.to_string(), point, auc));
                }
            }
        }
        Ok(rows)
    }

    pub fn evaluate(&self) -> CliResult<()> {
        let target: f64 = self.cfg.parse("eval.sparsity")?;
        let rule = self.rule()?;
        let rows = self.over_tasks(|model, inst| Ok(vec![fidelity_at_sparsity(model, inst, target, 0.02, rule)?]))?;
        self.write_stamped("metrics.csv", &metrics_csv(&rows))?;
        Ok(())
    }

    pub fn sweep(&self) -> CliResult<()> {
        let k_list: Vec<f64> = self.cfg.list("eval.k_list")?;
        if k_list.is_empty() {
            return Err(CliError::Config("`eval.k_list` is empty".into()));
        }
        let rule = self.rule()?;
        let rows = self.over_tasks(|model, inst| Ok(sweep_curve(model, inst, &k_list, rule)?))?;
        self.write_stamped("sweep.csv", &metrics_csv(&rows))?;
        Ok(())
    }

    /// Trains one explainer, explains every task with it and records timing.
    pub fn report(&self) -> CliResult<()> {
        let ds = self.dataset()?;
        if Self::level(&ds) != Level::Graph {
            return Err(CliError::Config("report needs a graph-level dataset".into()));
        }
        let encoder = self.encoder()?;
        let tasks = self.eval_tasks(&ds)?;
        let heads = tasks.iter().map(|&t| Ok((t, self.head(t)?))).collect::<CliResult<Vec<_>>>()?;
        let ec = self.explainer_config(Level::Graph)?;
        let graphs = self.eval_graphs(&ds)?;
        let norm = parse_enum(&self.cfg, "eval.condition_norm", ConditionNorm::parse)?;
        let (_, timing, metrics) = multitask_report(
            || Ok(train_embedding_explainer(&encoder, &ds, ExplainerMode::Graph, &ec, self.seed)?.explainer),
            &encoder,
            &heads,
            &graphs,
            self.cfg.parse("eval.sparsity")?,
            self.rule()?,
            norm,
        )?;
        let rows: Vec<_> = metrics
            .iter()
            .map(|m| (m.task.to_string(), "tage".to_string(), m.point, m.auc))
            .collect();
        self.write_stamped("report.csv", &metrics_csv(&rows))?;
        self.write_stamped("timing.txt", &timing.to_key_values())?;
        Ok(())
    }
}

/// Pooled edge AUC over instances that contain at least one ground-truth edge.
fn instance_auc(instances: &[ExplanationInstance]) -> Option<f64> {
    let labelled: Vec<(&[f64], &[bool])> = instances
        .iter()
        .filter_map(|i| {
            let gt = i.ground_truth.as_deref()?;
            gt.iter().any(|&b| b).then_some((i.scores.as_slice(), gt))
        })
        .collect();
    if labelled.is_empty() {
        None
    } else {
        pooled_edge_auc(labelled).ok()
    }
}
