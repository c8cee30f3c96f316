//! Entry-game data sets as CSV.
//!
//! One row per (market, player): `obs_id,player,y,x_0,...,x_{d-1}`. Rows
//! are grouped by market with `obs_id` counting up from 0, and within a
//! market `player` counts up from 0.

use std::io::{Read, Write};

use crate::entrygame::{EntryGame, Profile, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::model::{Covariate, Observation};

/// Observations and the game shape they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct GameDataset {
    pub players: usize,
    pub covariate_dim: usize,
    pub observations: Vec<Observation<Profile>>,
}

impl GameDataset {
    pub fn game(&self) -> Result<EntryGame> {
        EntryGame::with_covariate_dim(self.players, self.covariate_dim)
    }
}

pub fn write_game_csv<W: Write>(observations: &[Observation<Profile>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = observations.first() else {
        return Err(Error::InvalidInput("no observations to write".into()));
    };
    let dim = first.x.cols();
    let mut header = vec!["obs_id".to_string(), "player".to_string(), "y".to_string()];
    header.extend((0..dim).map(|k| format!("x_{k}")));
    w.write_record(&header)?;
    for (i, obs) in observations.iter().enumerate() {
        if obs.x.cols() != dim || obs.x.rows() != obs.y.players() {
            return Err(Error::DimensionMismatch {
                what: "covariate shape",
                expected: dim,
                got: obs.x.cols(),
            });
        }
        for s in 0..obs.y.players() {
            let mut record = vec![i.to_string(), s.to_string(), obs.y.action(s).to_string()];
            record.extend(obs.x.row(s).iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_index(field: &str, what: &str, line: u64) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| Error::InvalidInput(format!("line {line}: bad {what} {field:?}")))
}

pub fn read_game_csv<R: Read>(input: R) -> Result<GameDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    let fixed = ["obs_id", "player", "y"];
    if header.len() < 4 || header.iter().take(3).ne(fixed) {
        return Err(Error::InvalidInput(
            "header must start with obs_id,player,y followed by x_0,...".into(),
        ));
    }
    let dim = header.len() - 3;
    for (k, name) in header.iter().skip(3).enumerate() {
        if name != format!("x_{k}") {
            return Err(Error::InvalidInput(format!("header column {name:?} should be x_{k}")));
        }
    }

    let mut observations = Vec::new();
    let mut players: Option<usize> = None;
    let mut actions: Vec<u8> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut finish = |actions: &mut Vec<u8>, xs: &mut Vec<f64>, line: u64| -> Result<()> {
        match players {
            None => players = Some(actions.len()),
            Some(p) if p != actions.len() => {
                return Err(Error::InvalidInput(format!(
                    "line {line}: market has {} players, earlier markets have {p}",
                    actions.len()
                )))
            }
            _ => {}
        }
        let y = Profile::from_actions(actions)?;
        let x = Covariate::matrix(actions.len(), dim, std::mem::take(xs))?;
        observations.push(Observation { y, x });
        actions.clear();
        Ok(())
    };

    let mut current = 0usize;
    let mut line = 1u64;
    for record in reader.records() {
        let record = record?;
        line = record.position().map_or(line + 1, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::InvalidInput(format!("line {line}: wrong number of fields")));
        }
        let obs = parse_index(&record[0], "obs_id", line)?;
        let player = parse_index(&record[1], "player", line)?;
        if player == 0 && !actions.is_empty() {
            if obs != current + 1 {
                return Err(Error::InvalidInput(format!(
                    "line {line}: obs_id {obs} after {current}"
                )));
            }
            finish(&mut actions, &mut xs, line)?;
            current = obs;
        } else if obs != current || player != actions.len() {
            return Err(Error::InvalidInput(format!(
                "line {line}: expected obs_id {current}, player {}",
                actions.len()
            )));
        }
        if actions.len() >= MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                players: actions.len() + 1,
                limit: MAX_PLAYERS,
            });
        }
        actions.push(match &record[2] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::InvalidInput(format!("line {line}: y must be 0 or 1, got {other:?}")))
            }
        });
        for field in record.iter().skip(3) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::InvalidInput(format!("line {line}: bad covariate {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("line {line}: covariate is not finite")));
            }
            xs.push(v);
        }
    }
    if actions.is_empty() {
        return Err(Error::InvalidInput("data set has no rows".into()));
    }
    finish(&mut actions, &mut xs, line)?;
    Ok(GameDataset {
        players: players.expect("at least one market"),
        covariate_dim: dim,
        observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "obs_id,player,y,x_0,x_1\n0,0,1,1,0.5\n0,1,0,1,-0.25\n1,0,0,1,2\n1,1,1,1,0\n";

    #[test]
    fn reads_a_small_file() {
        let d = read_game_csv(SMALL.as_bytes()).unwrap();
        assert_eq!((d.players, d.covariate_dim, d.observations.len()), (2, 2, 2));
        assert_eq!(d.observations[0].y.actions(), vec![1, 0]);
        assert_eq!(d.observations[0].x.row(1), &[1.0, -0.25]);
        assert_eq!(d.observations[1].y.actions(), vec![0, 1]);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let d = read_game_csv(SMALL.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_game_csv(&d.observations, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), SMALL);
    }

    #[test]
    fn rejects_malformed_input() {
        let cases = [
            "",
            "obs_id,player,y\n",
            "obs,player,y,x_0\n0,0,1,1\n",
            "obs_id,player,y,x_1\n0,0,1,1\n",
            "obs_id,player,y,x_0\n",
            "obs_id,player,y,x_0\n0,0,2,1\n",
            "obs_id,player,y,x_0\n0,0,1,nan\n",
            "obs_id,player,y,x_0\n0,0,1,inf\n",
            "obs_id,player,y,x_0\n0,1,1,1\n",
            "obs_id,player,y,x_0\n0,0,1,1\n2,0,1,1\n",
            "obs_id,player,y,x_0\n0,0,1,1\n0,1,1,1\n1,0,1,1\n",
            "obs_id,player,y,x_0\n0,0,1\n",
            "obs_id,player,y,x_0\n-1,0,1,1\n",
        ];
        for c in cases {
            assert!(read_game_csv(c.as_bytes()).is_err(), "{c:?}");
        }
    }
}
