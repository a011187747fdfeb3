//! Run manifests: one per artifact directory, naming the command, config
//! digest, parameters, grid, wall time, and every emitted file.

use crate::config::Config;
use fracbv::grid::Grid;
use std::io;
use std::path::Path;

pub struct RunManifest {
    pub command: String,
    pub config: Config,
    pub grid_summary: String,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
}

pub fn grid_summary(grid: &Grid) -> String {
    let ax = grid.axis(0);
    match grid.dim() {
        1 => format!("{} nodes on [{}, {}] (h = {:.6e})", ax.n, ax.a, ax.b, ax.spacing()),
        _ => {
            let ay = grid.axis(1);
            format!(
                "{}x{} nodes on [{}, {}]x[{}, {}] (h = {:.6e})",
                ax.n,
                ay.n,
                ax.a,
                ax.b,
                ay.a,
                ay.b,
                ax.spacing()
            )
        }
    }
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command = {}\n", self.command));
        out.push_str(&format!("tool_version = {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("config_digest = {}\n", self.config.digest()));
        out.push_str(&format!("alpha = {}\n", self.config.alpha));
        out.push_str(&format!("beta = {}\n", self.config.beta));
        out.push_str(&format!("gamma = {}\n", self.config.gamma));
        out.push_str(&format!("p = {}\n", self.config.p));
        out.push_str(&format!("grid = {}\n", self.grid_summary));
        out.push_str(&format!("wall_time_s = {:.3}\n", self.wall_time_s));
        for a in &self.artifacts {
            out.push_str(&format!("artifact = {a}\n"));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        std::fs::write(dir.join("manifest.txt"), self.render())
    }
}
