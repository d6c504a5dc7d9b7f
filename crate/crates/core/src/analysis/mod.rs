//! Post-run analysis: stylized-fact tests, dislocations, daily activity
//! and calibration against real price data.

pub mod calibrate;
pub mod daily;
pub mod dislocations;
pub mod facts;
pub mod run;
pub mod series;
pub mod smile;
pub mod stats;
pub mod synthetic;

pub use daily::{daily_stats, DailyStats};
pub use dislocations::{detect_dislocations, feed_dislocations, DislocationSegment, DislocationSummary};
pub use facts::{run_facts, six_fact_score, FactOutcome, FactParams, FactResult};
pub use series::{sample_last_trade, ReturnSeries, Sampling};
