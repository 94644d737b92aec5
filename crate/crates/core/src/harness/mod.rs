//! Grid search, benchmarking, ranking and the command-line interface.

pub mod bench;
pub mod cli;
pub mod grid;
pub mod rank;

pub use bench::{read_results_csv, run_benchmark, split_seed, write_results_csv, BenchOptions, TrialResult};
pub use grid::{grid_search, Estimator, GridResult, GridSpec, Method, Params, SearchOptions};
pub use rank::{average_ranks, mean_rank, write_rank_csv, MethodRank, RankTable};
