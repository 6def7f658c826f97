//! Signal records, the on-disk corpus container, splits and batching.

mod container;
mod record;
mod split;
mod view;

pub use container::{
    read_container, write_container, ContainerSummary, Corpus, FORMAT_NAME, FORMAT_VERSION,
    MANIFEST_FILE, RECORDS_PER_SHARD,
};
pub use record::{standardize, LabelFamily, RecordMeta, SignalRecord, CHANNELS, LOS_CLASSES};
pub use split::{
    batch_iter, exclude_class, make_finetune_split, stratified_split, FinetunePlan,
    SplitAssignment, DEFAULT_RATIOS,
};
pub use view::{class_names, finetune_view, pretrain_view, TaskSplit};
