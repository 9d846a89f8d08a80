//! Shared test support: a seeded generator of random valid changelogs and
//! brute-force oracles that read nothing but raw entity records.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use lineage::fixtures::{self, dataset, imported_revision, product, slot_id, transform};
use lineage::model::{
    EntityHeader, EntityId, EntityKey, EntityKind, EntityRecord, Group, SlotDirection, TracingProperties, Tri,
};
use lineage::record::ExecutionRecorder;
use lineage::trace::{LineageNode, PrunePredicate};
use lineage::{ChangeLog, Store, TransactionDraft};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tri(rng: &mut ChaCha8Rng) -> Tri {
    match rng.gen_range(0..3) {
        0 => Tri::True,
        1 => Tri::False,
        _ => Tri::Unknown,
    }
}

pub fn random_properties(rng: &mut ChaCha8Rng) -> TracingProperties {
    TracingProperties {
        deterministic: random_tri(rng),
        reversible: random_tri(rng),
        privacy_preserving: random_tri(rng),
        generative: random_tri(rng),
        ..Default::default()
    }
}

struct TransformShape {
    revision: String,
    inputs: Vec<EntityId>,
    outputs: Vec<EntityId>,
}

/// Builds a random valid changelog of at most roughly `max_entities` live
/// entities. Every transaction is committed through [`ChangeLog::commit`],
/// so a rejection here means the generator and the validator disagree.
pub struct LogGenerator {
    rng: ChaCha8Rng,
    log: ChangeLog,
    clock: u64,
    counter: u64,
    datasets: Vec<String>,
    transforms: Vec<String>,
    shapes: Vec<TransformShape>,
    revisions: Vec<(String, String)>,
    groups: Vec<String>,
}

impl LogGenerator {
    pub fn new(seed: u64) -> Self {
        LogGenerator {
            rng: rng(seed),
            log: fixtures::bootstrap_log(),
            clock: 1,
            counter: 0,
            datasets: vec!["DS_in".into()],
            transforms: Vec::new(),
            shapes: Vec::new(),
            revisions: Vec::new(),
            groups: Vec::new(),
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    fn draft(&mut self) -> TransactionDraft {
        self.clock += 1;
        TransactionDraft::new(fixtures::IDENTITY).at(fixtures::fixture_time(self.clock))
    }

    fn commit(&mut self, draft: TransactionDraft) {
        if let Err(e) = self.log.commit(draft.clone()) {
            panic!("generator produced a rejected transaction: {e}\n{}\n{draft:#?}", e.report());
        }
    }

    fn add_dataset(&mut self, d: &mut TransactionDraft) {
        let id = self.fresh("DS");
        d.additions.push(dataset(&id).into());
        self.datasets.push(id);
    }

    fn add_transform_revision(&mut self, d: &mut TransactionDraft) {
        let reuse = !self.transforms.is_empty() && self.rng.gen_bool(0.3);
        let transform_id = if reuse {
            self.transforms.choose(&mut self.rng).unwrap().clone()
        } else {
            self.fresh("TF")
        };
        let revision = self.fresh("TR");
        let n_in = self.rng.gen_range(1..=3);
        let n_out = self.rng.gen_range(1..=2);
        let inputs: Vec<String> = (0..n_in).map(|i| format!("i{i}")).collect();
        let outputs: Vec<String> = (0..n_out).map(|i| format!("o{i}")).collect();
        let in_refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
        let out_refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        let props = random_properties(&mut self.rng);
        let mut entities = transform(&transform_id, &revision, &in_refs, &out_refs, props);
        if reuse {
            entities.remove(0);
        } else {
            self.transforms.push(transform_id);
        }
        d.additions.extend(entities);
        self.shapes.push(TransformShape {
            inputs: inputs.iter().map(|n| slot_id(&revision, SlotDirection::Input, n)).collect(),
            outputs: outputs.iter().map(|n| slot_id(&revision, SlotDirection::Output, n)).collect(),
            revision,
        });
    }

    fn import(&mut self, d: &mut TransactionDraft, staged: &mut Vec<(String, String)>) {
        let ds = self.datasets.choose(&mut self.rng).unwrap().clone();
        let id = self.fresh("R");
        d.additions.push(imported_revision(&id, &ds, &format!("blob/{id}")).into());
        staged.push((id, ds));
    }

    fn execute(&mut self, mut d: TransactionDraft, staged: &mut Vec<(String, String)>) -> TransactionDraft {
        let idx = self.rng.gen_range(0..self.shapes.len());
        let exec = self.fresh("E");
        let shape = &self.shapes[idx];
        let mut rec = ExecutionRecorder::new(exec.as_str(), shape.revision.as_str());
        for slot in &shape.inputs {
            let (rev, ds) = self.revisions.choose(&mut self.rng).unwrap().clone();
            rec = rec.input(slot.clone(), ds, rev);
        }
        let outputs = shape.outputs.clone();
        for slot in outputs {
            let ds = self.datasets.choose(&mut self.rng).unwrap().clone();
            let rev = self.fresh("R");
            rec = rec.output(slot, rev.as_str(), product(&ds, &format!("blob/{rev}")));
            staged.push((rev, ds));
        }
        d = rec.add_to(d);
        d
    }

    /// One random transaction.
    pub fn step(&mut self) {
        let mut d = self.draft();
        let mut staged = Vec::new();
        let roll = self.rng.gen_range(0..100);
        match roll {
            _ if self.shapes.is_empty() || self.datasets.len() < 2 => {
                self.add_dataset(&mut d);
                self.add_transform_revision(&mut d);
                self.import(&mut d, &mut staged);
            }
            0..=44 if !self.revisions.is_empty() => {
                for _ in 0..self.rng.gen_range(1..=3) {
                    d = self.execute(d, &mut staged);
                }
            }
            45..=59 => {
                for _ in 0..self.rng.gen_range(1..=2) {
                    self.import(&mut d, &mut staged);
                }
            }
            60..=69 => self.add_transform_revision(&mut d),
            70..=74 => self.add_dataset(&mut d),
            75..=84 if !self.revisions.is_empty() => {
                let (rev, _) = self.revisions.choose(&mut self.rng).unwrap().clone();
                let mut record = self.log.live().dataset_revision(&rev.as_str().into()).unwrap().clone();
                record.header.deprecated = true;
                d.modifications.push(record.into());
            }
            85..=91 => {
                let store = self.log.live();
                let removable: Vec<usize> = self
                    .revisions
                    .iter()
                    .enumerate()
                    .filter(|(_, (r, _))| {
                        store
                            .referrers_of(&EntityKey::new(EntityKind::DatasetRevision, r.as_str()))
                            .next()
                            .is_none()
                    })
                    .map(|(i, _)| i)
                    .collect();
                match removable.choose(&mut self.rng) {
                    Some(&i) => {
                        let (rev, _) = self.revisions.remove(i);
                        d = d.remove(EntityKind::DatasetRevision, rev);
                    }
                    None => self.import(&mut d, &mut staged),
                }
            }
            _ => {
                let mut items = Vec::new();
                for _ in 0..self.rng.gen_range(0..=4) {
                    let key = match self.rng.gen_range(0..3) {
                        0 => EntityKey::new(EntityKind::Dataset, self.datasets.choose(&mut self.rng).unwrap().as_str()),
                        1 if !self.transforms.is_empty() => {
                            EntityKey::new(EntityKind::Transform, self.transforms.choose(&mut self.rng).unwrap().as_str())
                        }
                        _ if !self.groups.is_empty() => {
                            EntityKey::new(EntityKind::Group, self.groups.choose(&mut self.rng).unwrap().as_str())
                        }
                        _ => EntityKey::new(EntityKind::Dataset, self.datasets[0].as_str()),
                    };
                    items.push(key);
                }
                let id = self.fresh("G");
                d.additions.push(Group { header: EntityHeader::new(id.as_str()), items, ..Default::default() }.into());
                self.groups.push(id);
            }
        }
        if d.is_empty() {
            self.import(&mut d, &mut staged);
        }
        self.commit(d);
        self.revisions.extend(staged);
    }

    pub fn run(mut self, max_entities: usize) -> ChangeLog {
        while self.log.live().len() + 24 <= max_entities {
            self.step();
        }
        self.log
    }
}

/// Random valid log of at most `max_entities` live entities.
pub fn random_log(seed: u64, max_entities: usize) -> ChangeLog {
    LogGenerator::new(seed).run(max_entities)
}

/// Independent reachability model rebuilt from raw execution-slot records.
pub struct Oracle {
    pub revisions: BTreeSet<EntityId>,
    pub executions: BTreeSet<EntityId>,
    pub forward: BTreeMap<LineageNode, Vec<LineageNode>>,
    pub backward: BTreeMap<LineageNode, Vec<LineageNode>>,
    pub transform_revision_of: BTreeMap<EntityId, EntityId>,
    pub properties: BTreeMap<EntityId, TracingProperties>,
    pub type_of_revision: BTreeMap<EntityId, EntityId>,
}

impl Oracle {
    pub fn new(store: &Store) -> Self {
        let mut slot_direction = BTreeMap::new();
        let mut o = Oracle {
            revisions: BTreeSet::new(),
            executions: BTreeSet::new(),
            forward: BTreeMap::new(),
            backward: BTreeMap::new(),
            transform_revision_of: BTreeMap::new(),
            properties: BTreeMap::new(),
            type_of_revision: BTreeMap::new(),
        };
        for e in store.entities() {
            match e {
                EntityRecord::TransformSlot(s) => {
                    slot_direction.insert(s.header.id.clone(), s.direction);
                }
                EntityRecord::DatasetRevision(r) => {
                    o.revisions.insert(r.header.id.clone());
                    o.type_of_revision.insert(r.header.id.clone(), r.type_revision_id.clone());
                }
                EntityRecord::TransformExecution(x) => {
                    o.executions.insert(x.header.id.clone());
                    o.transform_revision_of.insert(x.header.id.clone(), x.transform_revision_id.clone());
                }
                EntityRecord::TransformRevision(t) => {
                    o.properties.insert(t.header.id.clone(), t.tracing_properties.clone());
                }
                _ => {}
            }
        }
        for e in store.entities() {
            if let EntityRecord::TransformExecutionSlot(xs) = e {
                let rev = LineageNode::Revision(xs.dataset_revision_id.clone());
                let exec = LineageNode::Execution(xs.transform_execution_id.clone());
                let (from, to) = match slot_direction[&xs.transform_slot_id] {
                    SlotDirection::Input => (rev, exec),
                    SlotDirection::Output => (exec, rev),
                };
                o.forward.entry(from.clone()).or_default().push(to.clone());
                o.backward.entry(to).or_default().push(from);
            }
        }
        // A revision bound to several slots of one execution is still a
        // single step on any route.
        for list in o.forward.values_mut().chain(o.backward.values_mut()) {
            list.sort();
            list.dedup();
        }
        o
    }

    pub fn matches(&self, exec: &EntityId, predicates: &[PrunePredicate]) -> Option<String> {
        let props = &self.properties[&self.transform_revision_of[exec]];
        predicates.iter().find(|p| props.get(&p.property).as_bool() == Some(p.value)).map(|p| p.property.clone())
    }

    /// Plain BFS; executions matching a predicate are reached but not expanded.
    pub fn reach(&self, origin: &EntityId, forward: bool, predicates: &[PrunePredicate]) -> BTreeSet<LineageNode> {
        let adj = if forward { &self.forward } else { &self.backward };
        let start = LineageNode::Revision(origin.clone());
        let mut seen = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            if let LineageNode::Execution(e) = &n {
                if self.matches(e, predicates).is_some() {
                    continue;
                }
            }
            for m in adj.get(&n).into_iter().flatten() {
                if seen.insert(m.clone()) {
                    queue.push_back(m.clone());
                }
            }
        }
        seen
    }

    /// Number of distinct paths from `source` to `target`, saturating.
    pub fn path_count(&self, source: &EntityId, target: &EntityId) -> u64 {
        fn count(o: &Oracle, n: &LineageNode, target: &LineageNode, memo: &mut BTreeMap<LineageNode, u64>) -> u64 {
            if n == target {
                return 1;
            }
            if let Some(c) = memo.get(n) {
                return *c;
            }
            let mut total = 0u64;
            for m in o.forward.get(n).into_iter().flatten() {
                total = total.saturating_add(count(o, m, target, memo));
            }
            memo.insert(n.clone(), total);
            total
        }
        let target = LineageNode::Revision(target.clone());
        let mut memo = BTreeMap::new();
        count(self, &LineageNode::Revision(source.clone()), &target, &mut memo)
    }

    pub fn is_leaf(&self, rev: &EntityId) -> bool {
        self.forward.get(&LineageNode::Revision(rev.clone())).is_none_or(Vec::is_empty)
    }

    /// Structural recursion: a revision, its producer's transform revision
    /// and the closures of the producer's inputs.
    pub fn closure(&self, rev: &EntityId) -> (BTreeSet<EntityId>, BTreeSet<EntityId>) {
        let mut revs = BTreeSet::from([rev.clone()]);
        let mut trs = BTreeSet::new();
        for producer in self.backward.get(&LineageNode::Revision(rev.clone())).into_iter().flatten() {
            let LineageNode::Execution(e) = producer else { unreachable!() };
            trs.insert(self.transform_revision_of[e].clone());
            for input in self.backward.get(producer).into_iter().flatten() {
                let (r, t) = self.closure(input.id());
                revs.extend(r);
                trs.extend(t);
            }
        }
        (revs, trs)
    }
}

pub fn revisions_of(nodes: &BTreeSet<LineageNode>) -> BTreeSet<EntityId> {
    nodes.iter().filter(|n| n.is_revision()).map(|n| n.id().clone()).collect()
}

/// Runs the CLI in-process.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = lineage::cli::run(std::iter::once("lineage").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn file_digest(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).unwrap_or_default();
    format!("{:x}", Sha256::digest(bytes))
}

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Commits every `NN_*.json` draft of a fixture directory, in name order,
/// into a fresh log at `log` through the CLI.
pub fn build_fixture_log(name: &str, log: &Path) {
    let log_arg = log.to_str().unwrap();
    let (code, _, err) = cli(&["--log", log_arg, "init"]);
    assert_eq!(code, 0, "{err}");
    let mut drafts: Vec<PathBuf> = std::fs::read_dir(fixture_dir(name))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".json") && n.as_bytes()[0].is_ascii_digit())
        })
        .collect();
    drafts.sort();
    assert!(!drafts.is_empty(), "fixture {name} has no drafts");
    for draft in drafts {
        let (code, _, err) = cli(&["--log", log_arg, "commit", draft.to_str().unwrap()]);
        assert_eq!(code, 0, "{}: {err}", draft.display());
    }
}

pub const PROPERTY_NAMES: [&str; 4] = ["deterministic", "reversible", "privacy_preserving", "generative"];

pub fn random_predicates(rng: &mut ChaCha8Rng) -> Vec<PrunePredicate> {
    let n = rng.gen_range(0..=2);
    (0..n)
        .map(|_| PrunePredicate::new(*PROPERTY_NAMES.choose(rng).unwrap(), rng.gen_bool(0.5)))
        .collect()
}

/// Compares unpruned traces, leaves, closures and route counts of every
/// revision against the oracle. Returns one message per mismatch.
pub fn oracle_mismatches(store: &Store) -> Vec<String> {
    use lineage::trace::{self, TraceOptions};
    let oracle = Oracle::new(store);
    let mut out = Vec::new();
    let none = TraceOptions::default();
    for rev in &oracle.revisions {
        let fwd = trace::forward_trace(store, rev, &none).unwrap();
        let fwd_nodes: BTreeSet<LineageNode> = fwd.reached.keys().cloned().collect();
        let expect_fwd = oracle.reach(rev, true, &[]);
        if fwd_nodes != expect_fwd {
            out.push(format!("forward trace of {rev}: {fwd_nodes:?} != {expect_fwd:?}"));
        }
        let back = trace::backward_trace(store, rev, &none).unwrap();
        let back_nodes: BTreeSet<LineageNode> = back.reached.keys().cloned().collect();
        let expect_back = oracle.reach(rev, false, &[]);
        if back_nodes != expect_back {
            out.push(format!("backward trace of {rev}: {back_nodes:?} != {expect_back:?}"));
        }

        let leaves: BTreeSet<EntityId> = trace::impacted_leaves(store, rev).unwrap().into_iter().collect();
        let expect_leaves: BTreeSet<EntityId> =
            revisions_of(&expect_fwd).into_iter().filter(|r| oracle.is_leaf(r)).collect();
        if leaves != expect_leaves {
            out.push(format!("leaves of {rev}: {leaves:?} != {expect_leaves:?}"));
        }

        let closure = trace::environment_closure(store, rev).unwrap();
        let (expect_revs, expect_trs) = oracle.closure(rev);
        if closure.dataset_revisions != expect_revs || closure.transform_revisions != expect_trs {
            out.push(format!("closure of {rev} differs from structural recursion"));
        }

        for target in revisions_of(&expect_fwd) {
            if &target == rev {
                continue;
            }
            let routes = trace::lineage_route(store, &target, rev, None).unwrap();
            let expected = oracle.path_count(rev, &target);
            let limit = trace::DEFAULT_ROUTE_LIMIT as u64;
            let got = routes.routes.len() as u64;
            if got != expected.min(limit) || routes.truncated != (expected > limit) {
                out.push(format!("routes {rev} -> {target}: {got} (truncated {}) vs {expected}", routes.truncated));
            }
        }
    }
    out
}

/// Checks pruned traces from every revision against the oracle with the
/// matching executions' successors cut off.
pub fn pruning_mismatches(store: &Store, predicates: &[PrunePredicate]) -> Vec<String> {
    use lineage::trace::{self, TraceOptions};
    let oracle = Oracle::new(store);
    let opts = TraceOptions::pruning(predicates.iter().cloned());
    let mut out = Vec::new();
    for rev in &oracle.revisions {
        for forward in [true, false] {
            let direction = if forward { trace::Direction::Forward } else { trace::Direction::Backward };
            let pruned = trace::trace_in(store, rev, direction, &opts).unwrap();
            let plain = trace::trace_in(store, rev, direction, &TraceOptions::default()).unwrap();
            let nodes: BTreeSet<LineageNode> = pruned.reached.keys().cloned().collect();
            let expected = oracle.reach(rev, forward, predicates);
            if nodes != expected {
                out.push(format!("{direction:?} pruned trace of {rev} with {predicates:?}: {nodes:?} != {expected:?}"));
            }
            if !pruned.reached.keys().all(|n| plain.reached.contains_key(n)) {
                out.push(format!("{direction:?} pruned trace of {rev} is not a subset"));
            }
            if !pruned.edges.iter().all(|e| plain.edges.contains(e)) {
                out.push(format!("{direction:?} pruned edges of {rev} are not a subset"));
            }
            let pruned_at: BTreeSet<EntityId> = pruned.pruned_at.iter().map(|(e, _)| e.clone()).collect();
            let expected_pruned: BTreeSet<EntityId> = expected
                .iter()
                .filter_map(|n| match n {
                    LineageNode::Execution(e) if oracle.matches(e, predicates).is_some() => Some(e.clone()),
                    _ => None,
                })
                .collect();
            if pruned_at != expected_pruned {
                out.push(format!("{direction:?} pruned_at of {rev}: {pruned_at:?} != {expected_pruned:?}"));
            }
        }
    }
    out
}

/// A copy of `rev` with one non-header field changed.
pub fn mutate_revision(rng: &mut ChaCha8Rng, rev: &lineage::model::DatasetRevision) -> lineage::model::DatasetRevision {
    let mut m = rev.clone();
    match rng.gen_range(0..6) {
        0 => m.dataset_id = format!("{}_moved", rev.dataset_id).into(),
        1 => m.type_revision_id = format!("{}_next", rev.type_revision_id).into(),
        2 => {
            m.producer_slot_id = match &rev.producer_slot_id {
                Some(_) => None,
                None => Some("E_forged.slot".into()),
            }
        }
        3 => m.external_source_id = Some(format!("{}#rewritten", rev.external_source_id.clone().unwrap_or_default())),
        4 => m.external_blob_id = format!("{}#v2", rev.external_blob_id),
        _ => {
            m.extra.insert("note".into(), serde_json::json!(rng.gen::<u32>()));
        }
    }
    if rng.gen_bool(0.5) {
        // header changes ride along; they are not enough to make it legal
        m.header.deprecated = !m.header.deprecated;
    }
    m
}

/// Live dataset revisions of a store.
pub fn live_revisions(store: &Store) -> Vec<lineage::model::DatasetRevision> {
    store
        .entities()
        .filter_map(|e| match e {
            EntityRecord::DatasetRevision(r) => Some(r.clone()),
            _ => None,
        })
        .collect()
}

/// Writes `log` to `path` in the changelog interchange format.
pub fn write_changelog(log: &ChangeLog, path: &Path) {
    let file = std::fs::File::create(path).unwrap();
    lineage::interchange::write_log(std::io::BufWriter::new(file), log.transactions()).unwrap();
}

fn string_set(value: &serde_json::Value) -> BTreeSet<String> {
    value
        .as_array()
        .map(|items| items.iter().filter_map(|v| v.as_str().map(str::to_owned)).collect())
        .unwrap_or_default()
}

/// Commits a scenario's drafts through the CLI, asks the CLI for the
/// closure of the scenario's target and compares it with the
/// hand-enumerated sets in `expected_closure.json`.
pub fn fixture_closure_mismatches(name: &str) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("lineage.jsonl");
    build_fixture_log(name, &log);
    let text = std::fs::read_to_string(fixture_dir(name).join("expected_closure.json")).unwrap();
    let expected: serde_json::Value = serde_json::from_str(&text).unwrap();
    let target = expected["target"].as_str().unwrap();
    let (code, out, err) = cli(&["--log", log.to_str().unwrap(), "--format", "json", "closure", target]);
    if code != 0 {
        return vec![format!("{name}: closure of {target} exited with {code}: {err}")];
    }
    let actual: serde_json::Value = serde_json::from_str(&out).unwrap();
    let mut mismatches = Vec::new();
    for field in ["dataset_revisions", "transform_revisions", "type_revisions"] {
        let (want, got) = (string_set(&expected[field]), string_set(&actual[field]));
        if want != got {
            mismatches.push(format!("{name}: {field}: expected {want:?}, got {got:?}"));
        }
    }
    let got = string_set(&actual["dataset_revisions"]);
    for dump in string_set(&expected["dump_revisions"]) {
        if !got.contains(&dump) {
            mismatches.push(format!("{name}: contributing dump {dump} missing"));
        }
    }
    for excluded in string_set(&expected["excluded"]) {
        if got.contains(&excluded) {
            mismatches.push(format!("{name}: {excluded} does not contribute but is in the closure"));
        }
    }
    mismatches
}
