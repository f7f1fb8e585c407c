//! Plain-text scenario files.

use std::path::Path;

use railalloc_core::Scenario;

use crate::error::{Error, Result};

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario.to_text())?;
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_text(&text).map_err(Error::Parse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        let sc = Scenario::generate(500.0, 9, 20, 50.0, 50.0, 3).unwrap();
        save_scenario(&sc, &p).unwrap();
        let back = load_scenario(&p).unwrap();
        assert_eq!(back.association, sc.association);
        assert_eq!(back.seed, sc.seed);
        for (a, b) in back.users.iter().zip(&sc.users) {
            assert!((a.x - b.x).abs() <= 5e-7 && (a.y - b.y).abs() <= 5e-7);
        }
        std::fs::write(&p, "garbage").unwrap();
        assert!(matches!(load_scenario(&p), Err(Error::Parse(_))));
    }
}
