//! On-disk artifacts: the dataset directory and provenance headers.

use std::fs;
use std::path::Path;

use pdvn_core::{Molecule, RouteTree, WorldSpec};

use crate::config::RunConfig;
use crate::error::{io, CliError, Result};

pub const WORLD_FILE: &str = "world.txt";
pub const TRAIN_ROUTES_FILE: &str = "train_routes.txt";
pub const TEST_TARGETS_FILE: &str = "test_targets.txt";
pub const CONFIG_FILE: &str = "config.toml";

/// `#` comment lines naming the command, config hash, seed and worker count.
pub fn header(command: &str, cfg: &RunConfig) -> String {
    format!(
        "# pdvn {command}\n# config_hash = {}\n# seed = {}\n# workers = {}\n",
        cfg.hash(),
        cfg.seed,
        cfg.workers
    )
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    fs::write(path, text).map_err(io(path))
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io(path))
}

fn body(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.starts_with('#'))
}

pub struct Dataset {
    pub world: WorldSpec,
    pub train_routes: Vec<RouteTree>,
    pub test_targets: Vec<Molecule>,
}

impl Dataset {
    pub fn train_targets(&self) -> Vec<Molecule> {
        self.train_routes.iter().map(|r| r.molecule.clone()).collect()
    }

    pub fn save(&self, dir: &Path, head: &str) -> Result<()> {
        write(&dir.join(WORLD_FILE), &format!("{head}{}", self.world.to_text()))?;
        let routes: Vec<String> = self.train_routes.iter().map(RouteTree::to_text).collect();
        write(&dir.join(TRAIN_ROUTES_FILE), &format!("{head}{}", routes.join("\n")))?;
        let targets: String = self.test_targets.iter().map(|m| format!("{m}\n")).collect();
        write(&dir.join(TEST_TARGETS_FILE), &format!("{head}{targets}"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let world = WorldSpec::from_text(&read(&dir.join(WORLD_FILE))?)?;
        let text = read(&dir.join(TRAIN_ROUTES_FILE))?;
        let mut train_routes = Vec::new();
        let mut block = String::new();
        for line in body(&text).chain(std::iter::once("")) {
            if line.trim().is_empty() {
                if !block.is_empty() {
                    train_routes.push(RouteTree::from_text(&block)?);
                    block.clear();
                }
            } else {
                block.push_str(line);
                block.push('\n');
            }
        }
        let test_targets = body(&read(&dir.join(TEST_TARGETS_FILE))?)
            .filter(|l| !l.trim().is_empty())
            .map(|l| world.molecule(l.trim()))
            .collect::<pdvn_core::Result<Vec<_>>>()?;
        if train_routes.is_empty() || test_targets.is_empty() {
            return Err(CliError::Usage(format!("dataset in {} is empty", dir.display())));
        }
        Ok(Dataset {
            world,
            train_routes,
            test_targets,
        })
    }
}
