// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain a
// copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Staged circuit compilation.
//!
//! A transpile run is a pipeline of passes grouped into six stages (init,
//! layout, routing, translation, optimization, scheduling).  Each pass
//! transforms the dependency-graph form of the circuit and can read and
//! write a shared string-keyed property set.  Preset pipelines cover
//! optimization levels 0 through 3; custom passes plug in through a
//! registry and flow controllers (conditional and fixed-point items).

pub mod control_flow;
pub mod layout;
pub mod optimize;
pub mod routing;
pub mod rzx;
pub mod schedule;
pub mod synth2q;
pub mod translate;
pub mod validate;

use crate::circuit::{Circuit, CircuitError, Instruction, OpKind};
use crate::dag::DagCircuit;
use crate::quantum_info::NoiseModel;
use crate::target::Target;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TranspileError {
    #[error("circuit error: {0}")]
    Circuit(#[from] CircuitError),
    #[error("circuit needs {circuit} qubits but the target has {target}")]
    WidthExceeded { circuit: u32, target: u32 },
    #[error("invalid layout: {0}")]
    BadLayout(String),
    #[error("routing failed: {0}")]
    RoutingFailed(String),
    #[error("no translation to the target basis for `{0}`")]
    NoTranslationPath(String),
    #[error("scheduling failed: {0}")]
    SchedulingFailed(String),
    #[error("circuit violates the target ISA: {0}")]
    IsaViolation(String),
    #[error("a plugin named `{0}` is already registered")]
    DuplicatePlugin(String),
    #[error("no pass registered under `{0}`")]
    UnknownPass(String),
    #[error("pass failed: {0}")]
    Pass(String),
}

/// Shared key-value scratch space threaded through a pipeline run.
#[derive(Clone, Debug, Default)]
pub struct PropertySet {
    entries: BTreeMap<String, String>,
}

impl PropertySet {
    pub fn new() -> Self {
        PropertySet::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// A qubit mapping: index = logical position, value = physical qubit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout(Vec<u32>);

impl Layout {
    pub fn new(mapping: Vec<u32>) -> Self {
        Layout(mapping)
    }

    pub fn identity(n: u32) -> Self {
        Layout((0..n).collect())
    }

    pub fn physical(&self, logical: u32) -> u32 {
        self.0[logical as usize]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// `other` applied after `self`: logical -> self -> other.
    pub fn then(&self, other: &Layout) -> Layout {
        Layout(self.0.iter().map(|&p| other.physical(p)).collect())
    }

    pub fn to_metadata(&self) -> String {
        self.0
            .iter()
            .map(|q| q.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_metadata(text: &str) -> Result<Layout, TranspileError> {
        let mut mapping = Vec::new();
        for part in text.split(',') {
            let q: u32 = part
                .trim()
                .parse()
                .map_err(|_| TranspileError::BadLayout(format!("bad layout entry `{part}`")))?;
            mapping.push(q);
        }
        Ok(Layout(mapping))
    }
}

/// Metadata keys used to carry layout information on circuits.
pub const LAYOUT_INITIAL_KEY: &str = "layout.initial";
pub const LAYOUT_ROUTING_KEY: &str = "layout.routing_permutation";
pub const LAYOUT_FINAL_KEY: &str = "layout.final";

/// One transformation step.
pub trait Pass {
    fn name(&self) -> &str;
    fn run(
        &self,
        dag: DagCircuit,
        target: &Target,
        properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError>;
}

/// Pipeline element: a pass, a predicated pass, or a loop run to a fixed
/// point of the (two-qubit count, op count) metric.
pub enum PipelineItem {
    Single(Box<dyn Pass>),
    Conditional {
        predicate: Box<dyn Fn(&PropertySet) -> bool>,
        item: Box<PipelineItem>,
    },
    FixedPoint {
        items: Vec<PipelineItem>,
        max_iterations: usize,
    },
}

impl PipelineItem {
    pub fn pass(pass: impl Pass + 'static) -> Self {
        PipelineItem::Single(Box::new(pass))
    }

    pub fn when(predicate: impl Fn(&PropertySet) -> bool + 'static, item: PipelineItem) -> Self {
        PipelineItem::Conditional {
            predicate: Box::new(predicate),
            item: Box::new(item),
        }
    }

    pub fn fixed_point(items: Vec<PipelineItem>, max_iterations: usize) -> Self {
        PipelineItem::FixedPoint {
            items,
            max_iterations,
        }
    }
}

/// The six pipeline stages, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Init,
    Layout,
    Routing,
    Translation,
    Optimization,
    Scheduling,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Init,
        Stage::Layout,
        Stage::Routing,
        Stage::Translation,
        Stage::Optimization,
        Stage::Scheduling,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Init => "init",
            Stage::Layout => "layout",
            Stage::Routing => "routing",
            Stage::Translation => "translation",
            Stage::Optimization => "optimization",
            Stage::Scheduling => "scheduling",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Snapshot of circuit size after one pass, for `--explain` output.
#[derive(Clone, Debug, Serialize)]
pub struct PassRecord {
    pub stage: String,
    pub pass: String,
    pub ops: usize,
    pub twoq_gates: usize,
    pub depth: usize,
}

/// Result of a pipeline run.
#[derive(Debug)]
pub struct TranspileResult {
    pub circuit: Circuit,
    pub properties: PropertySet,
    pub records: Vec<PassRecord>,
}

impl TranspileResult {
    /// Mapping from the input circuit's qubits to the physical qubits
    /// holding them at the end of the routed circuit.
    pub fn final_layout(&self) -> Option<Layout> {
        Layout::from_metadata(self.circuit.metadata_value(LAYOUT_FINAL_KEY)?).ok()
    }

    pub fn initial_layout(&self) -> Option<Layout> {
        Layout::from_metadata(self.circuit.metadata_value(LAYOUT_INITIAL_KEY)?).ok()
    }

    pub fn explain_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }
}

fn instruction_twoq(inst: &Instruction) -> usize {
    match &inst.op {
        OpKind::Gate(_) if inst.qubits.len() == 2 => 1,
        OpKind::ForLoop { count, .. } => (inst.blocks[0].twoq_count() * count) as usize,
        _ if !inst.blocks.is_empty() => inst
            .blocks
            .iter()
            .map(|b| b.twoq_count() as usize)
            .sum(),
        _ => 0,
    }
}

fn dag_metrics(dag: &DagCircuit) -> (usize, usize) {
    let mut twoq = 0;
    let mut ops = 0;
    for node in dag.topological_op_nodes() {
        let inst = dag.instruction(node).expect("op node");
        ops += 1;
        twoq += instruction_twoq(inst);
    }
    (twoq, ops)
}

/// A staged pass pipeline.
pub struct PassPipeline {
    stages: Vec<(Stage, Vec<PipelineItem>)>,
}

impl Default for PassPipeline {
    fn default() -> Self {
        PassPipeline::new()
    }
}

impl PassPipeline {
    pub fn new() -> Self {
        PassPipeline {
            stages: Stage::ALL.iter().map(|&s| (s, Vec::new())).collect(),
        }
    }

    pub fn push(&mut self, stage: Stage, item: PipelineItem) {
        let slot = self
            .stages
            .iter_mut()
            .find(|(s, _)| *s == stage)
            .expect("every stage exists");
        slot.1.push(item);
    }

    pub fn run(&self, circuit: &Circuit, target: &Target) -> Result<TranspileResult, TranspileError> {
        let mut dag = DagCircuit::from_circuit(circuit);
        let mut properties = PropertySet::new();
        let mut records = Vec::new();
        for (stage, items) in &self.stages {
            for item in items {
                dag = run_item(item, dag, target, &mut properties, *stage, &mut records)?;
            }
        }
        let circuit = dag.to_circuit()?;
        Ok(TranspileResult {
            circuit,
            properties,
            records,
        })
    }
}

fn run_item(
    item: &PipelineItem,
    dag: DagCircuit,
    target: &Target,
    properties: &mut PropertySet,
    stage: Stage,
    records: &mut Vec<PassRecord>,
) -> Result<DagCircuit, TranspileError> {
    match item {
        PipelineItem::Single(pass) => {
            let dag = pass.run(dag, target, properties)?;
            let (twoq, ops) = dag_metrics(&dag);
            let depth = dag.to_circuit()?.depth() as usize;
            records.push(PassRecord {
                stage: stage.as_str().to_string(),
                pass: pass.name().to_string(),
                ops,
                twoq_gates: twoq,
                depth,
            });
            Ok(dag)
        }
        PipelineItem::Conditional { predicate, item } => {
            if predicate(properties) {
                run_item(item, dag, target, properties, stage, records)
            } else {
                Ok(dag)
            }
        }
        PipelineItem::FixedPoint {
            items,
            max_iterations,
        } => {
            let mut dag = dag;
            let mut metric = dag_metrics(&dag);
            for _ in 0..*max_iterations {
                for item in items {
                    dag = run_item(item, dag, target, properties, stage, records)?;
                }
                let next = dag_metrics(&dag);
                if next >= metric {
                    break;
                }
                metric = next;
            }
            Ok(dag)
        }
    }
}

/// Factory registry for passes addressable by name.
#[derive(Default)]
pub struct PluginRegistry {
    factories: BTreeMap<String, Box<dyn Fn() -> Box<dyn Pass>>>,
}

impl PluginRegistry {
    pub fn new() -> Self {
        PluginRegistry::default()
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn() -> Box<dyn Pass> + 'static,
    ) -> Result<(), TranspileError> {
        let name = name.into();
        if self.factories.contains_key(&name) {
            return Err(TranspileError::DuplicatePlugin(name));
        }
        self.factories.insert(name, Box::new(factory));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str) -> Result<Box<dyn Pass>, TranspileError> {
        self.factories
            .get(name)
            .map(|f| f())
            .ok_or_else(|| TranspileError::UnknownPass(name.to_string()))
    }
}

/// Options controlling the preset pipelines.
#[derive(Clone, Debug, Default)]
pub struct TranspileOptions {
    /// 0 = lay out, route, translate and schedule only; 1 = add inverse
    /// cancellation and 1q resynthesis; 2 = loop the cheap optimizations to
    /// a fixed point; 3 = add two-qubit block resynthesis.
    pub optimization_level: u8,
    /// Explicit initial placement (index = circuit qubit, value = physical).
    pub initial_layout: Option<Vec<u32>>,
    /// Rewrite RZZ rotations onto calibrated RZX interactions where the
    /// target advertises them.
    pub use_rzx: bool,
    /// Insert X-X dynamical-decoupling sequences into idle windows.
    pub dynamical_decoupling: bool,
    /// Insert idle-crosstalk compensation around feedforward windows for
    /// this noise model.
    pub compensate: Option<NoiseModel>,
}

impl TranspileOptions {
    pub fn level(level: u8) -> Self {
        TranspileOptions {
            optimization_level: level,
            ..TranspileOptions::default()
        }
    }
}

/// The preset pipeline for the given options.
pub fn preset_pipeline(options: &TranspileOptions) -> PassPipeline {
    let mut pipeline = PassPipeline::new();
    pipeline.push(
        Stage::Layout,
        PipelineItem::pass(layout::ChooseLayout::new(options.initial_layout.clone())),
    );
    pipeline.push(Stage::Layout, PipelineItem::pass(layout::ApplyLayout));
    pipeline.push(Stage::Routing, PipelineItem::pass(routing::RouteCircuit::new()));
    if options.use_rzx {
        pipeline.push(Stage::Translation, PipelineItem::pass(rzx::RzzToRzx));
    }
    pipeline.push(
        Stage::Translation,
        PipelineItem::pass(translate::TranslateToBasis),
    );
    let level = options.optimization_level;
    if level >= 3 {
        pipeline.push(
            Stage::Optimization,
            PipelineItem::pass(synth2q::Resynth2qBlocks),
        );
    }
    if level == 1 {
        pipeline.push(
            Stage::Optimization,
            PipelineItem::pass(optimize::CancelInverses),
        );
        pipeline.push(Stage::Optimization, PipelineItem::pass(optimize::Optimize1q));
    } else if level >= 2 {
        pipeline.push(
            Stage::Optimization,
            PipelineItem::fixed_point(
                vec![
                    PipelineItem::pass(optimize::CancelInverses),
                    PipelineItem::pass(optimize::Optimize1q),
                ],
                10,
            ),
        );
    }
    if level >= 1 {
        // Resynthesis can reintroduce gates outside the basis.
        pipeline.push(
            Stage::Optimization,
            PipelineItem::pass(translate::TranslateToBasis),
        );
    }
    if let Some(noise) = &options.compensate {
        pipeline.push(
            Stage::Scheduling,
            PipelineItem::pass(control_flow::CompensateCrosstalk::new(noise.clone())),
        );
    }
    pipeline.push(
        Stage::Scheduling,
        PipelineItem::pass(schedule::ScheduleAlap {
            dd: options.dynamical_decoupling,
        }),
    );
    pipeline.push(Stage::Scheduling, PipelineItem::pass(validate::ValidateIsa));
    pipeline
}

/// Run the preset pipeline for `options` on one circuit.
pub fn transpile(
    circuit: &Circuit,
    target: &Target,
    options: &TranspileOptions,
) -> Result<TranspileResult, TranspileError> {
    preset_pipeline(options).run(circuit, target)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct CountingPass;

    impl Pass for CountingPass {
        fn name(&self) -> &str {
            "counting"
        }

        fn run(
            &self,
            dag: DagCircuit,
            _target: &Target,
            properties: &mut PropertySet,
        ) -> Result<DagCircuit, TranspileError> {
            let runs: usize = properties
                .get("counting.runs")
                .map(|v| v.parse().unwrap())
                .unwrap_or(0);
            properties.set("counting.runs", (runs + 1).to_string());
            Ok(dag)
        }
    }

    fn tiny_target() -> Target {
        crate::target::presets::heron_custom("tiny", 2, &[(0, 1)]).unwrap()
    }

    #[test]
    fn pipeline_runs_passes_and_records() {
        let mut pipeline = PassPipeline::new();
        pipeline.push(Stage::Init, PipelineItem::pass(CountingPass));
        pipeline.push(Stage::Init, PipelineItem::pass(CountingPass));
        let mut c = Circuit::new(2, 0);
        c.cx(0, 1).unwrap();
        let result = pipeline.run(&c, &tiny_target()).unwrap();
        assert_eq!(result.properties.get("counting.runs"), Some("2"));
        assert_eq!(result.records.len(), 2);
        assert_eq!(result.records[0].twoq_gates, 1);
        assert!(result.explain_json().contains("counting"));
    }

    #[test]
    fn conditional_items_consult_the_property_set() {
        let mut pipeline = PassPipeline::new();
        pipeline.push(
            Stage::Init,
            PipelineItem::when(
                |props| props.get("missing").is_some(),
                PipelineItem::pass(CountingPass),
            ),
        );
        let c = Circuit::new(1, 0);
        let result = pipeline.run(&c, &tiny_target()).unwrap();
        assert_eq!(result.properties.get("counting.runs"), None);
    }

    #[test]
    fn fixed_point_stops_when_metric_stalls() {
        let mut pipeline = PassPipeline::new();
        pipeline.push(
            Stage::Optimization,
            PipelineItem::fixed_point(vec![PipelineItem::pass(CountingPass)], 10),
        );
        let c = Circuit::new(1, 0);
        let result = pipeline.run(&c, &tiny_target()).unwrap();
        // The metric never improves, so the loop runs exactly once.
        assert_eq!(result.properties.get("counting.runs"), Some("1"));
    }

    #[test]
    fn plugin_registry_rejects_duplicates() {
        let mut registry = PluginRegistry::new();
        registry
            .register("counting", || Box::new(CountingPass))
            .unwrap();
        let err = registry.register("counting", || Box::new(CountingPass));
        assert_eq!(
            err.unwrap_err(),
            TranspileError::DuplicatePlugin("counting".to_string())
        );
        assert!(registry.build("counting").is_ok());
        assert!(registry.build("other").is_err());
    }

    #[test]
    fn layout_round_trips_through_metadata() {
        let layout = Layout::new(vec![3, 1, 2]);
        let text = layout.to_metadata();
        assert_eq!(Layout::from_metadata(&text).unwrap(), layout);
        assert!(Layout::from_metadata("1,x").is_err());
        let other = Layout::new(vec![0, 3, 1, 2]);
        assert_eq!(layout.then(&other).as_slice(), &[2, 3, 1]);
    }
}
