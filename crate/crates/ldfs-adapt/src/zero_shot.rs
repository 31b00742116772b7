use ldfs_core::{cosine, ClassTextBank, UnitVector};

use crate::error::Result;

/// Class whose text-prompt embedding has the highest cosine similarity to
/// the image feature; ties break toward the lowest class index. Emptiness
/// is unrepresentable: [`ClassTextBank`] construction rejects zero classes.
pub fn zero_shot_classify(f: &UnitVector, bank: &ClassTextBank) -> Result<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut best_class = 0;
    for c in 0..bank.num_classes() {
        let row = UnitVector::new(bank.embedding(c)?.to_owned())?;
        let score = cosine(f, &row)?;
        if score > best {
            best = score;
            best_class = c;
        }
    }
    Ok(best_class)
}
