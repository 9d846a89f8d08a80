//! Helpers for recording an execution and its products explicitly.

use crate::model::{
    DatasetRevision, EntityHeader, EntityId, EntityRecord, TransformExecution, TransformExecutionSlot,
};
use crate::txn::TransactionDraft;

/// Collects one execution with its input and output bindings.
///
/// Execution-slot ids are derived as `<execution>.<slot>` unless given
/// explicitly with the `*_as` variants.
///
/// ```
/// use lineage::record::ExecutionRecorder;
/// use lineage::model::DatasetRevision;
///
/// let out = DatasetRevision {
///     dataset_id: "DS_model".into(),
///     type_revision_id: "TYR_blob_1".into(),
///     external_blob_id: "s3://models/7".into(),
///     ..Default::default()
/// };
/// let entities = ExecutionRecorder::new("E_7", "TF_train_v1")
///     .input("TF_train_v1.in.params", "DS_params", "R_p3")
///     .output("TF_train_v1.out.model", "R_m7", out)
///     .into_entities();
/// assert_eq!(entities.len(), 4);
/// ```
#[derive(Debug, Clone)]
pub struct ExecutionRecorder {
    execution: TransformExecution,
    slots: Vec<TransformExecutionSlot>,
    outputs: Vec<DatasetRevision>,
}

impl ExecutionRecorder {
    pub fn new(execution_id: impl Into<EntityId>, transform_revision_id: impl Into<EntityId>) -> Self {
        ExecutionRecorder {
            execution: TransformExecution {
                header: EntityHeader::new(execution_id),
                transform_revision_id: transform_revision_id.into(),
                ..Default::default()
            },
            slots: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn in_flow(mut self, flow_execution_id: impl Into<EntityId>) -> Self {
        self.execution.flow_execution_id = Some(flow_execution_id.into());
        self
    }

    fn derived_id(&self, slot: &EntityId) -> EntityId {
        format!("{}.{}", self.execution.header.id, slot).into()
    }

    /// Binds an existing revision to an input slot.
    pub fn input(
        self,
        slot_id: impl Into<EntityId>,
        dataset_id: impl Into<EntityId>,
        revision_id: impl Into<EntityId>,
    ) -> Self {
        let slot_id = slot_id.into();
        let id = self.derived_id(&slot_id);
        self.input_as(id, slot_id, dataset_id, revision_id)
    }

    pub fn input_as(
        mut self,
        binding_id: impl Into<EntityId>,
        slot_id: impl Into<EntityId>,
        dataset_id: impl Into<EntityId>,
        revision_id: impl Into<EntityId>,
    ) -> Self {
        self.slots.push(TransformExecutionSlot {
            header: EntityHeader::new(binding_id),
            transform_execution_id: self.execution.header.id.clone(),
            transform_slot_id: slot_id.into(),
            dataset_id: dataset_id.into(),
            dataset_revision_id: revision_id.into(),
            ..Default::default()
        });
        self
    }

    /// Records a new revision produced on an output slot. The revision's id
    /// and producer reference are filled in.
    pub fn output(self, slot_id: impl Into<EntityId>, revision_id: impl Into<EntityId>, revision: DatasetRevision) -> Self {
        let slot_id = slot_id.into();
        let id = self.derived_id(&slot_id);
        self.output_as(id, slot_id, revision_id, revision)
    }

    pub fn output_as(
        mut self,
        binding_id: impl Into<EntityId>,
        slot_id: impl Into<EntityId>,
        revision_id: impl Into<EntityId>,
        mut revision: DatasetRevision,
    ) -> Self {
        let binding_id = binding_id.into();
        revision.header.id = revision_id.into();
        revision.producer_slot_id = Some(binding_id.clone());
        revision.external_source_id = None;
        self.slots.push(TransformExecutionSlot {
            header: EntityHeader::new(binding_id),
            transform_execution_id: self.execution.header.id.clone(),
            transform_slot_id: slot_id.into(),
            dataset_id: revision.dataset_id.clone(),
            dataset_revision_id: revision.header.id.clone(),
            ..Default::default()
        });
        self.outputs.push(revision);
        self
    }

    pub fn into_entities(self) -> Vec<EntityRecord> {
        let mut out: Vec<EntityRecord> = vec![self.execution.into()];
        out.extend(self.outputs.into_iter().map(EntityRecord::from));
        out.extend(self.slots.into_iter().map(EntityRecord::from));
        out
    }

    /// Appends every recorded entity to the draft's additions.
    pub fn add_to(self, mut draft: TransactionDraft) -> TransactionDraft {
        draft.additions.extend(self.into_entities());
        draft
    }
}
