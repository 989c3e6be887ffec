mod build;
mod schedule;
mod tower;

pub use build::build_krieger;
pub use schedule::{schedule, HoleSchedule, Kappa, ScheduleEntry};
pub use tower::{ConstructionLog, StageLog, StepLog, TailStep, ToeplitzTower, TowerIssue, TowerLevel};
