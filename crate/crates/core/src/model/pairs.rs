use super::{ElementRef, TargetRef, TrainingPair};
use crate::corpus::vocab::EncodedPaper;

/// All (target, context) pairs of one paper.
///
/// Every non-textual element predicts every other non-textual element of the
/// paper, across and within categories. If the paper has text, its averaged
/// text vector predicts every non-textual element as well. Text tokens are
/// never contexts.
pub fn generate_pairs(paper: &EncodedPaper, text_category: usize) -> Vec<TrainingPair<'_>> {
    let elements: Vec<ElementRef> = paper
        .elements
        .iter()
        .enumerate()
        .filter(|&(cat, _)| cat != text_category)
        .flat_map(|(cat, idx)| idx.iter().map(move |&i| ElementRef::new(cat, i as usize)))
        .collect();
    let text = paper.category(text_category);

    let mut pairs = Vec::with_capacity(elements.len() * elements.len());
    for &target in &elements {
        for &context in &elements {
            if target != context {
                pairs.push(TrainingPair {
                    target: TargetRef::Element(target),
                    context,
                });
            }
        }
    }
    if !text.is_empty() {
        for &context in &elements {
            pairs.push(TrainingPair {
                target: TargetRef::TextAverage(text),
                context,
            });
        }
    }
    pairs
}
