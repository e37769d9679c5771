//! File schemas: CSV writers and readers with round-trip precision, and a
//! self-contained SVG plot of `log H` against `sqrt t`.

mod csv;
mod svg;

pub use csv::{
    read_entropy_series, read_law, read_snapshots, read_table, write_chaos, write_diagnostics,
    write_events, write_sim_snapshots, write_snapshots, write_trajectory, Table, CHAOS_HEADER,
    DIAGNOSTICS_HEADER, EVENTS_HEADER, SIM_SNAPSHOTS_HEADER, SNAPSHOTS_HEADER, SPARSE_FLOOR,
    TRAJECTORY_HEADER,
};
pub use svg::entropy_plot_svg;
