use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::envelope::is_valid_topic;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed topic pattern {0:?}")]
pub struct PatternError(pub String);

/// An exact topic, or `prefix/*` matching every topic below `prefix/`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopicPattern {
    Exact(String),
    Prefix(String),
}

impl TopicPattern {
    pub fn parse(pattern: &str) -> Result<Self, PatternError> {
        let bad = || PatternError(pattern.to_owned());
        if let Some(prefix) = pattern.strip_suffix("/*") {
            if !is_valid_topic(prefix) || prefix.contains('*') {
                return Err(bad());
            }
            return Ok(TopicPattern::Prefix(format!("{prefix}/")));
        }
        if !is_valid_topic(pattern) || pattern.contains('*') {
            return Err(bad());
        }
        Ok(TopicPattern::Exact(pattern.to_owned()))
    }

    pub fn matches(&self, topic: &str) -> bool {
        match self {
            TopicPattern::Exact(t) => t == topic,
            TopicPattern::Prefix(p) => topic.len() > p.len() && topic.starts_with(p.as_str()),
        }
    }
}

impl FromStr for TopicPattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for TopicPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopicPattern::Exact(t) => f.write_str(t),
            TopicPattern::Prefix(p) => write!(f, "{p}*"),
        }
    }
}
