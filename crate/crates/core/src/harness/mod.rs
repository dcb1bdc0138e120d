//! Homogenization limits measured on commensurate schedules of `eps`.

mod graph;
mod lemmas;
mod meter;
mod recovery;
mod schedule;
mod sweep;

pub use graph::{graph_convergence_check, GraphReport, GraphRow, GraphSample};
pub use lemmas::{jensen_bound_test, minimize_scalar, riemann_lebesgue_test, JensenReport, OscillationReport, OscillationRow, Piece};
pub use meter::{dictionary_field, TTopologyMeter, DICTIONARY_SIZE};
pub use recovery::{cell_element, collar, cutoff, liminf_check, recovery_sequence, recovery_torus, sample_potential, CorrectorBank, LiminfEntry, LiminfReport, LiminfRow, RecoveryResult};
pub use schedule::{fit_rate, EpsSchedule};
pub use sweep::{eps_sweep, lp_norm, sample_source, Source, SweepRecord, SweepReport, SweepSolutions, LINEAR_RATE, SWEEP_CSV_HEADER, SQRT_RATE};
