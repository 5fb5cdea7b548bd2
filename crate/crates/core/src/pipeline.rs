//! One interactive turn: classify, retrieve, prompt, generate, validate,
//! rerank, with a templated fallback when no candidate survives.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalogue::{serialize_for_prompt, Catalogue, ProductRecord, RoutingId};
use crate::config::DialogueConfig;
use crate::dialogue::{
    assemble_prompt, classify_intent, generate_candidates, parse_response, AblationFlags,
    Classification, GenerationBackend, GenerationRequest, HostResponse, IntentClassifier,
    ViewerComment,
};
use crate::rerank::{rerank, Candidate, RecentHistory, RerankContext, RerankScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub comment: ViewerComment,
    pub classification: Classification,
    /// Record picked by keyword retrieval and its coverage.
    pub retrieved: Option<(RoutingId, f64)>,
    /// Product the response is grounded on: the retrieved record, else the
    /// product currently in focus.
    pub active: Option<RoutingId>,
    pub flags: AblationFlags,
    pub prompt: String,
    pub raw_candidates: Vec<String>,
    /// Candidate index and the schema rule it broke.
    pub rejected: Vec<(usize, String)>,
    /// Schema-valid candidates, in generation order.
    pub valid_indices: Vec<usize>,
    /// Scores aligned with `valid_indices`.
    pub scores: Vec<RerankScore>,
    pub selected_index: Option<usize>,
    pub response: HostResponse,
    pub fallback: bool,
    pub backend_error: Option<String>,
}

pub struct Pipeline {
    catalogue: Arc<Catalogue>,
    config: DialogueConfig,
    backend: Arc<dyn GenerationBackend>,
    classifier: Option<Arc<dyn IntentClassifier>>,
}

impl Pipeline {
    pub fn new(
        catalogue: Arc<Catalogue>,
        config: DialogueConfig,
        backend: Arc<dyn GenerationBackend>,
    ) -> Self {
        Self {
            catalogue,
            config,
            backend,
            classifier: None,
        }
    }

    pub fn with_classifier(mut self, classifier: Arc<dyn IntentClassifier>) -> Self {
        self.classifier = Some(classifier);
        self
    }

    pub fn catalogue(&self) -> &Arc<Catalogue> {
        &self.catalogue
    }

    pub fn config(&self) -> &DialogueConfig {
        &self.config
    }

    pub fn respond(
        &self,
        comment: &ViewerComment,
        focus: Option<RoutingId>,
        history: &mut RecentHistory,
        flags: AblationFlags,
        seed: u64,
    ) -> TurnOutcome {
        let catalogue = &*self.catalogue;
        let classification = classify_intent(comment, &self.config.intent, self.classifier.as_deref());
        let retrieval = catalogue.retrieve(&comment.text);
        let retrieved = retrieval.as_ref().map(|r| (r.record.routing_id, r.coverage));
        let active: Option<&ProductRecord> = retrieval
            .as_ref()
            .map(|r| r.record)
            .or_else(|| focus.and_then(|id| catalogue.product(id)));

        let req = GenerationRequest {
            system_prompt: self.config.persona.clone(),
            intent: classification.label,
            comment: comment.clone(),
            product_context: active.map(|p| serialize_for_prompt(p, catalogue.glossary())),
            sampling: self.config.sampling,
        };
        let prompt = assemble_prompt(&req, flags);

        let (raw_candidates, backend_error) =
            match generate_candidates(&req, &prompt, &*self.backend, seed) {
                Ok(raw) => (raw, None),
                Err(e) => (e.partial().to_vec(), Some(e.to_string())),
            };

        let mut rejected = Vec::new();
        let mut batch = Vec::new();
        for (index, raw) in raw_candidates.iter().enumerate() {
            match parse_response(raw) {
                Ok(response) => batch.push(Candidate {
                    response,
                    raw: raw.clone(),
                    index,
                }),
                Err(e) => rejected.push((index, e.to_string())),
            }
        }
        let valid_indices: Vec<usize> = batch.iter().map(|c| c.index).collect();

        let ctx = RerankContext {
            comment: &comment.text,
            active,
            history,
            catalogue,
            stock_openings: &self.config.rerank.stock_openings,
            ngram: self.config.rerank.ngram,
        };
        let (response, selected_index, scores, fallback) =
            match rerank(&batch, &ctx, &self.config.weights, flags.rr_disabled) {
                Ok(out) => (
                    out.winner.response.clone(),
                    Some(out.winner.index),
                    out.scores,
                    false,
                ),
                Err(_) => (self.fallback_response(active), None, Vec::new(), true),
            };
        history.push(response.spoken.clone());

        TurnOutcome {
            comment: comment.clone(),
            classification,
            retrieved,
            active: active.map(|p| p.routing_id),
            flags,
            prompt,
            raw_candidates,
            rejected,
            valid_indices,
            scores,
            selected_index,
            response,
            fallback,
            backend_error,
        }
    }

    /// Safe response built from the active product's talking points.
    pub fn fallback_response(&self, active: Option<&ProductRecord>) -> HostResponse {
        let t = &self.config.fallback;
        let generic = || HostResponse {
            spoken: t.generic_spoken.clone(),
            slogan: t.slogan.clone(),
            hook_question: t.hook.clone(),
            cta: t.cta.clone(),
        };
        let Some(p) = active else {
            return generic();
        };
        let tp = p.talking_points.first().map(String::as_str).unwrap_or("");
        let candidate = HostResponse {
            spoken: format!("{}，{tp}。", p.name),
            ..generic()
        };
        if candidate.validate().is_ok() {
            candidate
        } else {
            generic()
        }
    }
}
