//! RF data sources: the RFB1 file format and the point-scatterer simulator.

mod format;
mod synth;

pub use format::{
    decode_rf, encode_rf, load_rf, quantize_int16, save_rf, Dtype, LoadError, RfFileHeader,
    HEADER_LEN, MAGIC, VERSION,
};
pub use synth::{
    pulse, pulse_sigma, synth_rf, Scatterer, PULSE_BANDWIDTH, PULSE_TRUNCATION_SIGMAS,
};
