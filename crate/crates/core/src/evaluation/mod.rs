//! Walk-forward experiments: windows, grid search, trade and return
//! statistics, and the reward-scatter diagnostic.

pub mod grid;
pub mod report;
pub mod scatter;
pub mod stats;
pub mod trades;
pub mod windows;

pub use grid::{grid_search, select_best, CellResult, GridCell, GridOutcome, GridSpec};
pub use report::{agent_report, provenance_line, return_table_csv, trade_table_csv, AgentReport};
pub use scatter::{reward_scatter, scatter_csv, ScatterPoint};
pub use stats::{compounded_return, daily_returns, daily_returns_with, max_drawdown, return_statistics, DailyReturn, ReturnBase, ReturnStats};
pub use trades::{extract_trades, trade_statistics, TradeRecord, TradeStats};
pub use windows::{make_windows, RollingWindow, WindowSpec};
