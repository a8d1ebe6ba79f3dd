use crate::error::ModelError;

/// Ordered labels of the mutually exclusive health states of a model.
///
/// State indices are zero-based everywhere in this crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new<I, S>(labels: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(ModelError::EmptyStateSpace);
        }
        for (i, label) in labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(ModelError::BlankLabel(i));
            }
            if labels[..i].contains(label) {
                return Err(ModelError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// `S1, S2, ..., Sn`.
    pub fn numbered(n: usize) -> Result<Self, ModelError> {
        Self::new((1..=n).map(|i| format!("S{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false; a state space holds at least one state.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_blanks() {
        assert!(matches!(
            StateSpace::new(["A", "B", "A"]),
            Err(ModelError::DuplicateLabel(l)) if l == "A"
        ));
        assert!(matches!(
            StateSpace::new(["A", " "]),
            Err(ModelError::BlankLabel(1))
        ));
        assert!(matches!(
            StateSpace::new(Vec::<String>::new()),
            Err(ModelError::EmptyStateSpace)
        ));
    }

    #[test]
    fn lookup() {
        let space = StateSpace::numbered(4).unwrap();
        assert_eq!(space.len(), 4);
        assert_eq!(space.index_of("S3"), Some(2));
        assert_eq!(space.label(3), Some("S4"));
        assert_eq!(space.index_of("S5"), None);
    }
}
