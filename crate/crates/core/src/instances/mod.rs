//! Problem instances: the elastic-net constrained least-squares family and small
//! problems with closed-form saddle points.

pub mod ensvm;
pub mod saddle;

pub use ensvm::{
    ensvm_block_update, ensvm_block_update_with, ensvm_closed_form, ensvm_dual_update, gen_ensvm,
    preset, EnsvmFile, EnsvmInstance, EnsvmModel, EnsvmPreset, UpdateForm, PRESETS,
};
pub use saddle::{SocSaddle, SyntheticSaddle};
