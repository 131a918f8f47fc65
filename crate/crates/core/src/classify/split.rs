use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ClassifyError, Dataset};

/// Class-balanced train/test split. Every class contributes the same
/// number of training rows, `floor(train_fraction * smallest class)`
/// clamped so each class keeps at least one row on both sides; everything
/// else goes to the test set. Row order within each side follows the
/// original dataset.
pub fn balanced_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), ClassifyError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ClassifyError::BadFraction(train_fraction));
    }
    let counts = data.class_counts();
    if let Some(k) = counts.iter().position(|&c| c < 2) {
        return Err(ClassifyError::ClassTooSmall(data.class_names[k].clone()));
    }
    let min = *counts.iter().min().ok_or(ClassifyError::EmptyDataset)?;
    let per_class = ((train_fraction * min as f64).floor() as usize).clamp(1, min - 1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_mask = vec![false; data.len()];
    for class in 0..data.n_classes() {
        let mut rows: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        rows.shuffle(&mut rng);
        for &i in &rows[..per_class] {
            train_mask[i] = true;
        }
    }
    let train: Vec<usize> = (0..data.len()).filter(|&i| train_mask[i]).collect();
    let test: Vec<usize> = (0..data.len()).filter(|&i| !train_mask[i]).collect();
    Ok((data.subset(&train), data.subset(&test)))
}
