//! Encoder + sensor logging: trace files, the live stream format, and
//! binning into reading-versus-arc-length profiles.

pub mod profile;
pub mod stream;
pub mod trace;

pub use profile::{
    build_profile, sample_phases, Bin, Phase, Profile, ProfileError, ProfileOptions, DEFAULT_BIN_WIDTH, PROFILE_HEADER,
};
pub use stream::{stream_decode, FrameError, StreamDecoder};
pub use trace::{parse_trace_csv, write_trace_csv, Sample, Trace, TraceError, TRACE_HEADER};
