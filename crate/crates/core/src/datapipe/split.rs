use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::VideoDataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Fraction of all videos that go to training (35 of 50 by default).
    pub train_fraction: f64,
    pub min_train_per_genre: usize,
    pub min_test_per_genre: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            min_train_per_genre: 3,
            min_test_per_genre: 1,
        }
    }
}

/// Genre-stratified train/test partition. Every genre first receives its
/// minimum train and test videos; the remaining videos are shuffled and
/// used to top training up to `round(train_fraction · n)`. Output datasets
/// keep manifest order.
pub fn split(ds: &VideoDataset, config: &SplitConfig, rng: &mut Rng) -> Result<(VideoDataset, VideoDataset)> {
    if !(0.0..=1.0).contains(&config.train_fraction) {
        return Err(Error::config(
            "train_fraction",
            format!("{} outside [0, 1]", config.train_fraction),
        ));
    }
    let mut genres: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, v) in ds.videos.iter().enumerate() {
        genres.entry(v.genre.as_str()).or_default().push(i);
    }
    let per_genre_min = config.min_train_per_genre + config.min_test_per_genre;
    for (genre, members) in &genres {
        if members.len() < per_genre_min {
            return Err(Error::config(
                "split",
                format!(
                    "genre `{genre}` has {} videos, needs at least {per_genre_min} ({} train + {} test)",
                    members.len(),
                    config.min_train_per_genre,
                    config.min_test_per_genre
                ),
            ));
        }
    }
    let n = ds.len();
    let target = (config.train_fraction * n as f64).round() as usize;
    let min_train = config.min_train_per_genre * genres.len();
    let min_test = config.min_test_per_genre * genres.len();
    if target < min_train || target + min_test > n {
        return Err(Error::config(
            "split",
            format!(
                "{target} training videos out of {n} cannot satisfy per-genre minimums ({min_train} train, {min_test} test)"
            ),
        ));
    }

    let mut in_train = vec![false; n];
    let mut pool = Vec::new();
    for members in genres.values_mut() {
        rng.shuffle(members);
        for &i in &members[..config.min_train_per_genre] {
            in_train[i] = true;
        }
        pool.extend_from_slice(&members[per_genre_min..]);
    }
    rng.shuffle(&mut pool);
    for &i in &pool[..target - min_train] {
        in_train[i] = true;
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (v, &t) in ds.videos.iter().zip(&in_train) {
        if t {
            train.push(v.clone());
        } else {
            test.push(v.clone());
        }
    }
    Ok((
        VideoDataset::new(train, ds.score_scale)?,
        VideoDataset::new(test, ds.score_scale)?,
    ))
}
