//! Maze navigation with a skill repertoire: world model, parallel-root MCTS
//! over GP-corrected skill outcomes, and the episode loop.

mod episode;
mod maze;
mod mcts;

pub use episode::{action_candidates, execute_in_maze, parse_log, replay, run_episode, Episode, EpisodeConfig, LogEntry, LogSummary, StepRecord, Variant, MAX_ACTIONS};
pub use maze::{DistanceField, Maze, MazeError, Segment, CELL, FIELD_RESOLUTION, GOAL_RADIUS, ROBOT_RADIUS};
pub use mcts::{all_masks, farthest_point_subset, mcts_plan, predicted_delta, simulate_step, ActionSet, MaskModel, Outcome, Plan, PlanConfig};

/// The shipped benchmark maze.
pub const CANONICAL_MAZE: &str = include_str!("../../assets/maze_paper.txt");

pub fn canonical_maze() -> Maze {
    Maze::parse(CANONICAL_MAZE).expect("shipped maze is valid")
}

#[cfg(test)]
mod tests;
