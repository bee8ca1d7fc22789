//! Scan ingestion, model providers, synthetic scenes and the task runner.

mod build;
mod cloud_io;
mod providers;
mod scan;
mod synth;
mod task;
mod vocab;

pub use build::{build_map, build_map_with, build_memory, grid_from_map, BuildError, MapConfig};
pub use cloud_io::{read_ply, write_ply, PlyError};
pub use providers::{
    CameraProvider, Capture, DetectionProvider, EmbeddingProvider, GraspProvider, PrecomputedEmbeddings,
    PrecomputedGrasps, ProviderError, Providers, SegmentationProvider,
};
pub use scan::{
    decode_scan, encode_scan, load_scan, save_scan, ScanArchive, ScanError, MANIFEST_FILE, PAYLOAD_FILE,
    SCAN_FORMAT_VERSION,
};
pub use synth::{
    gen_synthetic_scene, random_apartment, read_scene_file, write_scene, Apartment, DetectorSpec, EntityKind,
    EntitySpec, EntityTruth, GroundTruth, Rendering, ScanCamera, SceneError, SceneFile, SceneSpec, SyntheticWorld,
    VocabSpec, FLOOR_ID, NO_HIT, SCENE_FILE, TRUTH_FILE, WALL_ID,
};
pub use task::{
    nearest_free_cell, run_task, DropStage, GraspStage, NavigationStage, Stage, StageFailure, TaskConfig, TaskError,
    TaskReport, TaskSpec,
};
pub use vocab::{SyntheticVocabulary, DEFAULT_VOCAB_DIM, DEFAULT_VOCAB_SEED, MAX_LABEL_COHERENCE};
