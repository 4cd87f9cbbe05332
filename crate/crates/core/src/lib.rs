//! Spatial-domain trajectory planning by sequential linear programming.

pub mod assembly;
pub mod clothoid;
pub mod footprint;
pub mod frenet;
pub mod lp;
pub mod planner;
pub mod report;
pub mod scenario;
pub mod simplex;
pub mod slp;
pub mod speed;
pub mod vehicle;

pub use frenet::{
    corridor_bounds, map_obstacles, Corridor, FrenetError, Obstacle, ObstacleEnvelope, PassSide, RoadCenterline,
    RoadWidth,
};
pub use lp::{LinearProgram, Row, RowKind, RowLabel};
pub use vehicle::{Grid, LinearizedStage, ModelError, SpatialState, VehicleParams};
pub use simplex::{solve, BasisHint, ConstraintKey, LpSolution, LpStatus, SolverError, SolverOptions};
pub use planner::{plan, Method, Plan, PlanError, PlanOptions, Slacks};
pub use report::{emit_report, ReportError};
pub use scenario::{Scenario, ScenarioError, Settings};
pub use slp::{SlpSettings, TerminationReason};
pub use speed::SpeedProfile;
