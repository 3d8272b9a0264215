//! Motion records, the synthetic regime-switching generator, and windowing.

mod record;
mod synth;
mod window;

pub use record::{MotionDataset, MotionRecord};
pub use synth::{
    desk_regimes, generate_synthetic, m_shape_force, ActionRegime, JointWave, SyntheticConfig,
    TransitionConfig, WrenchPattern,
};
pub use window::{window_count, window_dataset, WindowedExample};
