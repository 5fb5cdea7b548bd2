//! Out-of-catalogue claim detection over a closed lexicon.

use serde::{Deserialize, Serialize};

use super::HostResponse;
use crate::catalogue::{Catalogue, ProductRecord};
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClaimViolation {
    /// A known ingredient term that is not in the glossary.
    UnknownIngredient { term: String },
    /// A known product name that is not in the catalogue.
    UnknownProduct { term: String },
    /// A catalogue product other than the active one.
    UnsanctionedProduct { name: String },
}

impl ClaimViolation {
    /// Whether the violation mentions a product other than the active one.
    pub fn is_unsanctioned_mention(&self) -> bool {
        matches!(
            self,
            ClaimViolation::UnknownProduct { .. } | ClaimViolation::UnsanctionedProduct { .. }
        )
    }
}

/// Blanks out every occurrence of the given terms so shorter lexicon terms
/// cannot match inside them.
fn mask(text: &str, terms: &[String]) -> String {
    let mut out = text.to_string();
    for t in terms {
        if !t.is_empty() && out.contains(t.as_str()) {
            out = out.replace(t.as_str(), "\u{1}");
        }
    }
    out
}

/// Scans all four fields of a response against the catalogue's closed claim
/// lexicon. An empty result means the response passes the Correctness check.
pub fn validate_claims(
    resp: &HostResponse,
    active: Option<&ProductRecord>,
    catalogue: &Catalogue,
) -> Vec<ClaimViolation> {
    let text = normalize(&resp.full_text());
    let mut violations = Vec::new();

    let glossary_terms: Vec<String> = catalogue
        .glossary()
        .entries()
        .iter()
        .map(|e| normalize(&e.ingredient))
        .collect();
    let catalogue_names: Vec<String> = catalogue
        .products()
        .iter()
        .map(|p| normalize(&p.name))
        .collect();

    let lexicon = catalogue.lexicon();
    let ingredient_scan = mask(&text, &glossary_terms);
    for term in &lexicon.off_catalogue_ingredients {
        if ingredient_scan.contains(normalize(term).as_str()) {
            violations.push(ClaimViolation::UnknownIngredient { term: term.clone() });
        }
    }

    let product_scan = mask(&text, &catalogue_names);
    for term in &lexicon.off_catalogue_products {
        if product_scan.contains(normalize(term).as_str()) {
            violations.push(ClaimViolation::UnknownProduct { term: term.clone() });
        }
    }

    if let Some(active) = active {
        for (product, name) in catalogue.products().iter().zip(&catalogue_names) {
            if product.routing_id != active.routing_id && text.contains(name.as_str()) {
                violations.push(ClaimViolation::UnsanctionedProduct {
                    name: product.name.clone(),
                });
            }
        }
    }
    violations
}
