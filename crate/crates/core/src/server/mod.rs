//! Server side of the twin: ingestion, time-series storage, live fan-out,
//! alerting, command authorization and fermentation analysis.

pub mod alerts;
pub mod analysis;
pub mod clock;
pub mod control;
pub mod metric;
pub mod pubsub;
pub mod safety;
pub mod store;
pub mod twin;

pub use alerts::{AlertCondition, AlertError, AlertEvent, AlertLog, NewAlert, Severity};
pub use analysis::{
    abv_estimate, analyze, apparent_attenuation, fit_logistic_hours, least_squares_slope,
    AnalysisError, AnalysisParams, Anomaly, DerivedMetrics, LogisticFit, TrendReport,
};
pub use clock::{
    estimate_offset, ClockError, ClockOffset, OffsetTracker, DEFAULT_MAX_ROUND_TRIP_MS,
};
pub use control::{
    authorize, effective_confirmations, validate_command, Authorization, CommandError,
    CommandRecord, CommandStatus, ControlService, Decision, PendingCommand, SafetyContext,
    PENDING_WINDOW,
};
pub use metric::{Metric, UnknownMetric};
pub use pubsub::{Broker, Publication, SubscriptionId, TopicFilter};
pub use safety::{SafetyConfig, SafetyMonitor, SafetyOutput};
pub use store::{
    Point, Resolution, Rollup, SeriesData, StoreError, StoreStats, TimeSeriesStore,
    DEFAULT_RAW_RETENTION,
};
pub use twin::{
    metric_topic, BatchSummary, ControllerView, DeadLetter, IngestOutcome, IngestStats,
    LiveData, ServerConfig, ServerError, TwinServer, ALERTS_TOPIC, COMMANDS_TOPIC,
    CONTROLLER_TOPIC,
};
