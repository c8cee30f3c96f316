//! Multi-player binary entry game.
//!
//! Player `s` enters (`y_s = 1`) or stays out. Entering pays
//! `x_s' beta - delta * (number of other entrants) + eps_s`, staying out
//! pays zero, and the observed profile is a pure-strategy Nash equilibrium.
//! Shocks are i.i.d. standard normal, so the latent law has no parameters
//! and the reference transform is the identity.
//!
//! For a fixed profile the set of shocks that make it an equilibrium is an
//! axis-aligned product of half-lines: `eps_s >= t_s` for entrants and
//! `eps_s <= t_s` for the others, with
//! `t_s = -(x_s' beta - delta * sum_{s' != s} y_s')`.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::latent::{draw_uniforms, materialize, LatentSample};
use crate::model::{
    check_latent_dim, check_uniform, Covariate, Observation, StructuralModel, Theta,
};
use crate::normal::inverse_normal_cdf;
use crate::rng::{Stream, StreamSeeds};

pub const MAX_PLAYERS: usize = 20;

/// Action profile; player 0 is the most significant position in the
/// lexicographic order.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Profile {
    players: u8,
    bits: u32,
}

impl Profile {
    pub fn from_actions(actions: &[u8]) -> Result<Self> {
        if actions.len() > MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                players: actions.len(),
                limit: MAX_PLAYERS,
            });
        }
        let mut bits = 0u32;
        for (s, &a) in actions.iter().enumerate() {
            match a {
                0 => {}
                1 => bits |= 1 << s,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "action must be 0 or 1, got {other}"
                    )))
                }
            }
        }
        Ok(Self {
            players: actions.len() as u8,
            bits,
        })
    }

    fn from_bits(players: usize, bits: u32) -> Self {
        Self {
            players: players as u8,
            bits,
        }
    }

    pub fn players(&self) -> usize {
        self.players as usize
    }

    #[inline]
    pub fn action(&self, s: usize) -> u8 {
        ((self.bits >> s) & 1) as u8
    }

    pub fn entrants(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn actions(&self) -> Vec<u8> {
        (0..self.players()).map(|s| self.action(s)).collect()
    }

    /// Same profile with player `s` switched.
    pub fn flipped(&self, s: usize) -> Self {
        Self {
            players: self.players,
            bits: self.bits ^ (1 << s),
        }
    }
}

impl Ord for Profile {
    fn cmp(&self, other: &Self) -> Ordering {
        self.players.cmp(&other.players).then_with(|| {
            for s in 0..self.players() {
                match self.action(s).cmp(&other.action(s)) {
                    Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Profile {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Profile(")?;
        for s in 0..self.players() {
            write!(f, "{}", self.action(s))?;
        }
        write!(f, ")")
    }
}

/// `(beta, delta)`; `theta1 = [beta_0, .., beta_{k-1}, delta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTheta {
    pub beta: Vec<f64>,
    pub delta: f64,
}

impl GameTheta {
    pub fn new(beta: Vec<f64>, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "entry game needs finite beta and delta >= 0, got beta={beta:?}, delta={delta}"
            )));
        }
        Ok(Self { beta, delta })
    }

    pub fn from_theta(theta: &Theta) -> Result<Self> {
        match theta.theta1.split_last() {
            Some((&delta, beta)) if !beta.is_empty() => Self::new(beta.to_vec(), delta),
            _ => Err(Error::InvalidParameter(
                "entry game theta1 must be [beta.., delta]".into(),
            )),
        }
    }

    pub fn to_theta(&self) -> Theta {
        let mut theta1 = self.beta.clone();
        theta1.push(self.delta);
        Theta {
            theta1,
            theta2: Vec::new(),
        }
    }
}

fn check_shapes(players: usize, x: &Covariate, theta: &GameTheta) -> Result<()> {
    if x.rows() != players {
        return Err(Error::DimensionMismatch {
            what: "covariate rows (players)",
            expected: players,
            got: x.rows(),
        });
    }
    if x.cols() != theta.beta.len() {
        return Err(Error::DimensionMismatch {
            what: "covariate columns (beta length)",
            expected: theta.beta.len(),
            got: x.cols(),
        });
    }
    Ok(())
}

#[inline]
fn index(x: &Covariate, beta: &[f64], s: usize) -> f64 {
    x.row(s).iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Weak equilibrium check: no player strictly gains by deviating.
pub fn is_pure_ne(y: &Profile, x: &Covariate, eps: &[f64], theta: &GameTheta) -> Result<bool> {
    let players = y.players();
    check_shapes(players, x, theta)?;
    check_latent_dim(players, eps)?;
    let entrants = y.entrants() as f64;
    Ok((0..players).all(|s| {
        let ys = y.action(s);
        let others = entrants - f64::from(ys);
        let payoff = index(x, &theta.beta, s) - theta.delta * others + eps[s];
        if ys == 1 {
            payoff >= 0.0
        } else {
            payoff <= 0.0
        }
    }))
}

/// All pure-strategy equilibria in ascending lexicographic order.
pub fn enumerate_ne(x: &Covariate, eps: &[f64], theta: &GameTheta) -> Result<Vec<Profile>> {
    let players = x.rows();
    if players > MAX_PLAYERS {
        return Err(Error::TooManyPlayers {
            players,
            limit: MAX_PLAYERS,
        });
    }
    check_shapes(players, x, theta)?;
    check_latent_dim(players, eps)?;
    let base: Vec<f64> = (0..players)
        .map(|s| index(x, &theta.beta, s) + eps[s])
        .collect();
    let mut out = Vec::new();
    // Enumerate in lexicographic order: player 0 is the leading digit.
    for code in 0u32..(1u32 << players) {
        let mut bits = 0u32;
        for s in 0..players {
            if (code >> (players - 1 - s)) & 1 == 1 {
                bits |= 1 << s;
            }
        }
        let entrants = bits.count_ones() as f64;
        let ok = (0..players).all(|s| {
            let ys = (bits >> s) & 1;
            let others = entrants - f64::from(ys);
            let payoff = base[s] - theta.delta * others;
            if ys == 1 {
                payoff >= 0.0
            } else {
                payoff <= 0.0
            }
        });
        if ok {
            out.push(Profile::from_bits(players, bits));
        }
    }
    Ok(out)
}

/// Thresholds `t_s = -(x_s' beta - delta * sum_{s' != s} y_s')`.
pub fn box_thresholds(y: &Profile, x: &Covariate, theta: &GameTheta) -> Result<Vec<f64>> {
    let players = y.players();
    check_shapes(players, x, theta)?;
    let entrants = y.entrants() as f64;
    Ok((0..players)
        .map(|s| {
            let others = entrants - f64::from(y.action(s));
            -(index(x, &theta.beta, s) - theta.delta * others)
        })
        .collect())
}

/// Shocks rationalizing one profile: `eps_s >= t_s` for entrants and
/// `eps_s <= t_s` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSection {
    thresholds: Vec<f64>,
    profile: Profile,
}

impl BoxSection {
    pub fn new(y: &Profile, x: &Covariate, theta: &GameTheta) -> Result<Self> {
        Ok(Self {
            thresholds: box_thresholds(y, x, theta)?,
            profile: *y,
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Euclidean distance from `eps` to the box.
    #[inline]
    pub fn distance(&self, eps: &[f64]) -> f64 {
        let mut sq = 0.0;
        for (s, (&t, &e)) in self.thresholds.iter().zip(eps).enumerate() {
            let gap = if self.profile.action(s) == 1 {
                t - e
            } else {
                e - t
            };
            if gap > 0.0 {
                sq += gap * gap;
            }
        }
        sq.sqrt()
    }
}

pub fn game_dist_to_section(
    eps_tilde: &[f64],
    y: &Profile,
    x: &Covariate,
    theta: &GameTheta,
) -> Result<f64> {
    check_latent_dim(y.players(), eps_tilde)?;
    Ok(BoxSection::new(y, x, theta)?.distance(eps_tilde))
}

/// The entry game as a [`StructuralModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct EntryGame {
    players: usize,
    covariate_dim: usize,
}

impl EntryGame {
    /// Covariates `X_s = (1, X_1s)`.
    pub fn new(players: usize) -> Result<Self> {
        Self::with_covariate_dim(players, 2)
    }

    pub fn with_covariate_dim(players: usize, covariate_dim: usize) -> Result<Self> {
        if players == 0 || covariate_dim == 0 {
            return Err(Error::InvalidParameter(
                "entry game needs at least one player and one covariate".into(),
            ));
        }
        if players > MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                players,
                limit: MAX_PLAYERS,
            });
        }
        Ok(Self {
            players,
            covariate_dim,
        })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    fn game_theta(&self, theta: &Theta) -> Result<GameTheta> {
        let g = GameTheta::from_theta(theta)?;
        if g.beta.len() != self.covariate_dim {
            return Err(Error::DimensionMismatch {
                what: "beta length",
                expected: self.covariate_dim,
                got: g.beta.len(),
            });
        }
        Ok(g)
    }

    fn check_profile(&self, y: &Profile) -> Result<()> {
        if y.players() != self.players {
            return Err(Error::DimensionMismatch {
                what: "profile length",
                expected: self.players,
                got: y.players(),
            });
        }
        Ok(())
    }
}

impl StructuralModel for EntryGame {
    type Outcome = Profile;
    type Section = BoxSection;

    fn latent_dim(&self) -> usize {
        self.players
    }

    fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.covariate_dim).map(|k| format!("beta{k}")).collect();
        names.push("delta".into());
        names
    }

    fn theta1_dim(&self) -> usize {
        self.covariate_dim + 1
    }

    fn check_theta(&self, theta: &Theta) -> Result<()> {
        self.game_theta(theta)?;
        if !theta.theta2.is_empty() {
            return Err(Error::InvalidParameter(
                "entry game has no latent-law parameters".into(),
            ));
        }
        Ok(())
    }

    fn support_contains(&self, y: &Profile, x: &Covariate, u: &[f64], theta: &Theta) -> Result<bool> {
        self.check_profile(y)?;
        is_pure_ne(y, x, u, &self.game_theta(theta)?)
    }

    fn predictions(&self, u: &[f64], x: &Covariate, theta: &Theta) -> Result<Vec<Profile>> {
        enumerate_ne(x, u, &self.game_theta(theta)?)
    }

    fn section(&self, y: &Profile, x: &Covariate, theta: &Theta) -> Result<Option<BoxSection>> {
        self.check_profile(y)?;
        BoxSection::new(y, x, &self.game_theta(theta)?).map(Some)
    }

    fn section_distance(&self, section: &BoxSection, u: &[f64]) -> f64 {
        section.distance(u)
    }

    fn latent_quantile(&self, nu: &[f64], _x: &Covariate, theta2: &[f64]) -> Result<Vec<f64>> {
        if !theta2.is_empty() {
            return Err(Error::InvalidParameter(
                "entry game has no latent-law parameters".into(),
            ));
        }
        self.reference_quantile(nu)
    }

    fn reference_quantile(&self, nu: &[f64]) -> Result<Vec<f64>> {
        check_latent_dim(self.players, nu)?;
        check_uniform(nu)?;
        Ok(nu.iter().map(|&p| inverse_normal_cdf(p)).collect())
    }

    fn star_transform(&self, u_star: &[f64], _x: &Covariate, _theta2: &[f64]) -> Result<Vec<f64>> {
        check_latent_dim(self.players, u_star)?;
        Ok(u_star.to_vec())
    }

    fn star_section(&self, y: &Profile, x: &Covariate, theta: &Theta) -> Result<Option<BoxSection>> {
        self.section(y, x, theta)
    }
}

/// How the observed equilibrium is picked when several exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// Uniformly at random among the equilibria.
    Uniform,
    /// Lexicographically smallest equilibrium.
    First,
    /// Per observation, the equilibrium whose section is farthest from the
    /// statistic's own latent draw for that observation. A greedy stand-in
    /// for choosing the equilibria that jointly maximize the statistic.
    AdversarialGreedy,
}

impl std::str::FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "first" => Ok(Self::First),
            "adversarial_greedy" => Ok(Self::AdversarialGreedy),
            other => Err(Error::InvalidParameter(format!(
                "unknown selection rule {other:?} (expected uniform, first or adversarial_greedy)"
            ))),
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::First => "first",
            Self::AdversarialGreedy => "adversarial_greedy",
        })
    }
}

/// Simulated data with the shocks that generated it.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub observations: Vec<Observation<Profile>>,
    pub shocks: Vec<Vec<f64>>,
    /// Number of equilibria at each observation.
    pub multiplicity: Vec<usize>,
}

/// Draws `n` markets with `X_1s ~ N(0, 1)` and `eps ~ N(0, I)`.
///
/// Observation `i` reads its draws from its own substream of
/// `seeds.dataset()`. The adversarial rule scores equilibria against the
/// latent sample a test seeded with the same `seeds` would use.
pub fn simulate_dgp(
    game: &EntryGame,
    n: usize,
    theta_true: &GameTheta,
    selection: Selection,
    seeds: &StreamSeeds,
) -> Result<SimulatedData> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    let theta = theta_true.to_theta();
    game.check_theta(&theta)?;
    let players = game.players();
    let k = game.covariate_dim();

    let mut xs = Vec::with_capacity(n);
    let mut shocks = Vec::with_capacity(n);
    let mut picks = Vec::with_capacity(n);
    for i in 0..n {
        let mut stream = Stream::new(seeds.dataset(), i as u64);
        let mut data = Vec::with_capacity(players * k);
        for _ in 0..players {
            data.push(1.0);
            for _ in 1..k {
                data.push(stream.standard_normal());
            }
        }
        let eps: Vec<f64> = (0..players).map(|_| stream.standard_normal()).collect();
        picks.push(stream.uniform());
        xs.push(Covariate::matrix(players, k, data)?);
        shocks.push(eps);
    }

    let latent: Option<LatentSample> = match selection {
        Selection::AdversarialGreedy => {
            let draws = draw_uniforms(seeds.latent(), 0, n, players);
            Some(materialize(&draws, &xs, &theta.theta2, game)?)
        }
        _ => None,
    };

    let mut observations = Vec::with_capacity(n);
    let mut multiplicity = Vec::with_capacity(n);
    for (i, x) in xs.into_iter().enumerate() {
        let equilibria = enumerate_ne(&x, &shocks[i], theta_true)?;
        if equilibria.is_empty() {
            return Err(Error::InvalidParameter(
                "no pure-strategy equilibrium at the simulated shocks".into(),
            ));
        }
        multiplicity.push(equilibria.len());
        let y = match selection {
            Selection::First => equilibria[0],
            Selection::Uniform => {
                let idx = ((picks[i] * equilibria.len() as f64) as usize).min(equilibria.len() - 1);
                equilibria[idx]
            }
            Selection::AdversarialGreedy => {
                let u = latent.as_ref().expect("latent sample").row(i);
                let mut best = equilibria[0];
                let mut best_dist = f64::NEG_INFINITY;
                for y in &equilibria {
                    let d = BoxSection::new(y, &x, theta_true)?.distance(u);
                    if d > best_dist {
                        best_dist = d;
                        best = *y;
                    }
                }
                best
            }
        };
        observations.push(Observation { y, x });
    }
    Ok(SimulatedData {
        observations,
        shocks,
        multiplicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_x(players: usize) -> Covariate {
        Covariate::matrix(players, 2, vec![0.0; players * 2]).unwrap()
    }

    fn theta(b0: f64, b1: f64, delta: f64) -> GameTheta {
        GameTheta::new(vec![b0, b1], delta).unwrap()
    }

    fn p(a: &[u8]) -> Profile {
        Profile::from_actions(a).unwrap()
    }

    #[test]
    fn decoupled_game_has_the_threshold_profile() {
        let x = Covariate::matrix(3, 2, vec![1.0, 0.2, 1.0, -1.0, 1.0, 0.5]).unwrap();
        let th = theta(0.3, 0.7, 0.0);
        let eps = [0.4, -2.0, 0.1];
        let expected: Vec<u8> = (0..3)
            .map(|s| {
                let v: f64 = x.row(s).iter().zip(&th.beta).map(|(a, b)| a * b).sum();
                u8::from(v + eps[s] >= 0.0)
            })
            .collect();
        let ne = enumerate_ne(&x, &eps, &th).unwrap();
        assert_eq!(ne, vec![p(&expected)]);
        assert!(is_pure_ne(&p(&expected), &x, &eps, &th).unwrap());
    }

    #[test]
    fn everyone_enters_when_profitable() {
        let th = theta(0.0, 0.0, 0.0);
        let x = zero_x(2);
        assert!(is_pure_ne(&p(&[1, 1]), &x, &[0.5, 0.5], &th).unwrap());
        assert!(!is_pure_ne(&p(&[0, 0]), &x, &[0.5, 0.5], &th).unwrap());
    }

    #[test]
    fn multiplicity_case() {
        let th = theta(0.0, 0.0, 0.5);
        let x = zero_x(2);
        let eps = [0.2, 0.3];
        assert!(is_pure_ne(&p(&[1, 0]), &x, &eps, &th).unwrap());
        assert!(!is_pure_ne(&p(&[1, 1]), &x, &eps, &th).unwrap());
        assert_eq!(
            enumerate_ne(&x, &eps, &th).unwrap(),
            vec![p(&[0, 1]), p(&[1, 0])]
        );
        assert_eq!(enumerate_ne(&x, &[0.7, 0.8], &th).unwrap(), vec![p(&[1, 1])]);
    }

    #[test]
    fn unilateral_deviation_breaks_a_strict_equilibrium() {
        let th = theta(0.0, 0.0, 0.5);
        let x = zero_x(2);
        let eps = [0.7, 0.8];
        let y = p(&[1, 1]);
        assert!(is_pure_ne(&y, &x, &eps, &th).unwrap());
        for s in 0..2 {
            assert!(!is_pure_ne(&y.flipped(s), &x, &eps, &th).unwrap());
        }
    }

    #[test]
    fn thresholds_and_distance() {
        let th = theta(0.0, 0.0, 0.5);
        let x = zero_x(2);
        assert_eq!(box_thresholds(&p(&[1, 1]), &x, &th).unwrap(), vec![0.5, 0.5]);
        assert_eq!(game_dist_to_section(&[0.0, 1.0], &p(&[1, 1]), &x, &th).unwrap(), 0.5);
        assert_eq!(game_dist_to_section(&[0.6, 1.0], &p(&[1, 1]), &x, &th).unwrap(), 0.0);
        let decoupled = theta(0.4, -0.2, 0.0);
        let xs = Covariate::matrix(2, 2, vec![1.0, 1.0, 1.0, 3.0]).unwrap();
        let a = box_thresholds(&p(&[1, 0]), &xs, &decoupled).unwrap();
        let b = box_thresholds(&p(&[0, 1]), &xs, &decoupled).unwrap();
        assert_eq!(a, b);
        assert!((a[0] + 0.2).abs() < 1e-15 && (a[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn boundary_shock_is_an_equilibrium() {
        let th = theta(0.0, 0.0, 0.5);
        let x = zero_x(2);
        let y = p(&[1, 1]);
        let t = box_thresholds(&y, &x, &th).unwrap();
        assert!(is_pure_ne(&y, &x, &t, &th).unwrap());
        assert_eq!(game_dist_to_section(&t, &y, &x, &th).unwrap(), 0.0);
    }

    #[test]
    fn profiles_order_lexicographically() {
        let mut v = vec![p(&[1, 0, 0]), p(&[0, 1, 1]), p(&[0, 0, 1]), p(&[1, 1, 0])];
        v.sort();
        assert_eq!(v, vec![p(&[0, 0, 1]), p(&[0, 1, 1]), p(&[1, 0, 0]), p(&[1, 1, 0])]);
        assert_eq!(format!("{:?}", p(&[1, 0, 1])), "Profile(101)");
        assert!(Profile::from_actions(&[2]).is_err());
    }

    #[test]
    fn negative_delta_is_rejected() {
        assert!(GameTheta::new(vec![0.0, 0.0], -0.1).is_err());
        let game = EntryGame::new(2).unwrap();
        assert!(game.check_theta(&Theta { theta1: vec![0.0, 0.0, -1.0], theta2: vec![] }).is_err());
        assert!(game.check_theta(&Theta { theta1: vec![0.0, 0.0, 0.1], theta2: vec![] }).is_ok());
    }

    #[test]
    fn too_many_players() {
        assert!(matches!(EntryGame::new(21), Err(Error::TooManyPlayers { .. })));
        let x = Covariate::matrix(21, 1, vec![0.0; 21]).unwrap();
        let th = GameTheta::new(vec![0.0], 0.0).unwrap();
        assert!(matches!(
            enumerate_ne(&x, &[0.0; 21], &th),
            Err(Error::TooManyPlayers { .. })
        ));
    }

    #[test]
    fn shape_errors() {
        let th = theta(0.0, 0.0, 0.5);
        assert!(is_pure_ne(&p(&[1, 1]), &zero_x(3), &[0.0, 0.0], &th).is_err());
        assert!(is_pure_ne(&p(&[1, 1]), &zero_x(2), &[0.0], &th).is_err());
    }

    #[test]
    fn reference_parameterization_simulates() {
        let game = EntryGame::new(6).unwrap();
        let th = theta(0.6, 0.6, 0.3);
        let data = simulate_dgp(&game, 50, &th, Selection::Uniform, &StreamSeeds::new(3)).unwrap();
        assert_eq!(data.observations.len(), 50);
        for (obs, eps) in data.observations.iter().zip(&data.shocks) {
            assert_eq!(obs.x.rows(), 6);
            assert!(obs.x.row(0)[0] == 1.0);
            assert!(is_pure_ne(&obs.y, &obs.x, eps, &th).unwrap());
        }
    }

    #[test]
    fn selection_is_irrelevant_without_interaction() {
        let game = EntryGame::new(3).unwrap();
        let th = theta(0.6, 0.6, 0.0);
        let seeds = StreamSeeds::new(11);
        let a = simulate_dgp(&game, 40, &th, Selection::Uniform, &seeds).unwrap();
        let b = simulate_dgp(&game, 40, &th, Selection::First, &seeds).unwrap();
        let c = simulate_dgp(&game, 40, &th, Selection::AdversarialGreedy, &seeds).unwrap();
        assert_eq!(a.observations, b.observations);
        assert_eq!(a.observations, c.observations);
        assert!(a.multiplicity.iter().all(|&m| m == 1));
    }
}
