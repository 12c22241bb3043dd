//! Agents that answer from the gold query of each question.

use std::collections::HashMap;

use super::{verdict_line, AgentError, AgentReply, FormulationRequest, SearchPhase, SkeletonEvaluator, SkeletonFormulator};
use crate::schema::DatabaseProfile;
use crate::skeleton::{extract_skeleton, parse_query, refinement_check, GranularityLevel, Skeleton};
use crate::sql::{SqlQuery, SyntaxError};

/// Gold queries and their Detailed skeletons keyed by (database id, question).
#[derive(Debug, Clone, Default)]
pub struct GoldBook {
    gold: HashMap<(String, String), (String, Skeleton)>,
}

impl GoldBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, db_id: &str, question: &str, gold_sql: &str) -> Result<(), SyntaxError> {
        let tree = parse_query(&SqlQuery::new(gold_sql))?;
        let skeleton = extract_skeleton(&tree, GranularityLevel::Detailed);
        self.gold.insert((db_id.to_string(), question.to_string()), (gold_sql.to_string(), skeleton));
        Ok(())
    }

    pub fn get(&self, db_id: &str, question: &str) -> Option<&Skeleton> {
        self.gold.get(&(db_id.to_string(), question.to_string())).map(|(_, s)| s)
    }

    pub fn sql(&self, db_id: &str, question: &str) -> Option<&str> {
        self.gold.get(&(db_id.to_string(), question.to_string())).map(|(q, _)| q.as_str())
    }

    fn require(&self, db_id: &str, question: &str) -> Result<&Skeleton, AgentError> {
        self.get(db_id, question).ok_or_else(|| AgentError::Backend(format!("no gold query for question in {db_id}: {question}")))
    }
}

/// Proposes the gold skeleton's projection for each phase.
#[derive(Debug, Clone)]
pub struct GoldFormulator(pub GoldBook);

impl SkeletonFormulator for GoldFormulator {
    fn propose(&self, req: &FormulationRequest<'_>) -> Result<Vec<String>, AgentError> {
        let gold = self.0.require(&req.schema.db_id, req.question)?;
        let child = match req.phase {
            SearchPhase::Base => gold.coarsen(GranularityLevel::Base).expect("detailed coarsens to base"),
            SearchPhase::Expanded => {
                let depth = req.parent.map_or(0, Skeleton::nesting_depth);
                if gold.nesting_depth() <= depth {
                    return Ok(Vec::new());
                }
                gold.truncate(depth + 1)
            }
            SearchPhase::DetailedStep1 => gold.without_joins(),
            SearchPhase::DetailedStep2 => gold.clone(),
        };
        Ok(vec![child.text().to_string()])
    }
}

/// Accepts exactly the candidates that refine into the gold skeleton.
#[derive(Debug, Clone)]
pub struct GoldEvaluator(pub GoldBook);

impl SkeletonEvaluator for GoldEvaluator {
    fn judge(&self, schema: &DatabaseProfile, question: &str, candidate: &Skeleton) -> Result<AgentReply, AgentError> {
        let gold = self.0.require(&schema.db_id, question)?;
        let ok = refinement_check(candidate, gold).unwrap_or(false);
        Ok(verdict_line(ok).into())
    }
}
