//! Bundled sample networks and scenarios (the `data/` directory of the
//! repository, embedded for tests and examples).

/// Five-entity demonstration network.
pub const NET_A: &str = include_str!("../../../data/net_a.grid");

/// 14-bus reconstruction with three-valued IDRs.
pub const IEEE14_MIIM: &str = include_str!("../../../data/ieee14_miim.grid");

/// The same topology with binary IDRs.
pub const IEEE14_IIM: &str = include_str!("../../../data/ieee14_iim.grid");

/// Bus P12 failing at t=0, observed for 5 ms (three-valued model).
pub const P12_MIIM_SCN: &str = include_str!("../../../data/p12_miim.scn");

/// Bus P12 failing at t=0, observed for 5 ms (binary model).
pub const P12_IIM_SCN: &str = include_str!("../../../data/p12_iim.scn");
