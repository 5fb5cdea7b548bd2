//! Product knowledge base: records, ingredient glossary, pitch scripts, keyword
//! retrieval and prompt serialization.
//!
//! The catalogue is immutable after [`load_catalogue`] and can be shared freely
//! across threads. The on-disk format is a single TOML document; see
//! `docs/catalogue-format.md` for the schema.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize, occurrences, visible_char_count};

/// Inclusive bounds on the visible character count of a pitch script.
pub const SCRIPT_CHARS_MIN: usize = 180;
pub const SCRIPT_CHARS_MAX: usize = 240;

const BUNDLED_CATALOGUE: &str = include_str!("../data/catalogue.toml");

/// Internal numeric product identifier. Used for session state and asset
/// lookup only; it must never reach a generation prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoutingId(pub u64);

impl fmt::Display for RoutingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Cleanser,
    Serum,
    Moisturizer,
    Sunscreen,
}

impl Category {
    /// Fixed order used for tie-breaking in category detection.
    pub const ALL: [Category; 4] = [
        Category::Cleanser,
        Category::Serum,
        Category::Moisturizer,
        Category::Sunscreen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Cleanser => "cleanser",
            Category::Serum => "serum",
            Category::Moisturizer => "moisturizer",
            Category::Sunscreen => "sunscreen",
        }
    }

    /// Display label used inside prompts.
    pub fn label(self) -> &'static str {
        match self {
            Category::Cleanser => "洁面",
            Category::Serum => "精华",
            Category::Moisturizer => "面霜/乳液",
            Category::Sunscreen => "防晒",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ingredient {
    pub name: String,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductRecord {
    pub routing_id: RoutingId,
    pub name: String,
    pub category: Category,
    pub ingredients: Vec<Ingredient>,
    pub texture: String,
    pub skin_types: Vec<String>,
    pub usage: String,
    pub talking_points: Vec<String>,
    pub disclaimer: String,
}

impl ProductRecord {
    /// Name tokens used for retrieval: the full name plus any `·`- or
    /// whitespace-separated parts of at least two characters.
    pub fn name_tokens(&self) -> Vec<String> {
        let full = normalize(&self.name);
        let mut tokens = vec![full.clone()];
        for part in full.split(|c: char| c == '·' || c == ' ') {
            if part.chars().count() >= 2 && !tokens.iter().any(|t| t == part) {
                tokens.push(part.to_string());
            }
        }
        tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngredientGlossaryEntry {
    pub ingredient: String,
    pub description: String,
}

/// Ingredient glossary keyed by ingredient name, in file order.
#[derive(Debug, Clone, Default)]
pub struct Glossary {
    entries: Vec<IngredientGlossaryEntry>,
    index: HashMap<String, usize>,
}

impl Glossary {
    pub fn new(entries: Vec<IngredientGlossaryEntry>) -> Result<Self, CatalogueError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            if entry.ingredient.trim().is_empty() {
                return Err(CatalogueError::invariant(
                    format!("glossary entry #{i}"),
                    "ingredient name must be non-empty",
                ));
            }
            if entry.description.trim().is_empty() {
                return Err(CatalogueError::invariant(
                    format!("glossary entry {}", entry.ingredient),
                    "description must be non-empty",
                ));
            }
            if index.insert(entry.ingredient.clone(), i).is_some() {
                return Err(CatalogueError::invariant(
                    format!("glossary entry {}", entry.ingredient),
                    "ingredient name must be unique",
                ));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn get(&self, ingredient: &str) -> Option<&IngredientGlossaryEntry> {
        self.index.get(ingredient).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, ingredient: &str) -> bool {
        self.index.contains_key(ingredient)
    }

    pub fn entries(&self) -> &[IngredientGlossaryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcStage {
    Hook,
    Explain,
    Guide,
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSentence {
    pub arc: ArcStage,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PitchScript {
    pub routing_id: RoutingId,
    pub sentences: Vec<ScriptSentence>,
}

impl PitchScript {
    pub fn visible_chars(&self) -> usize {
        self.sentences.iter().map(|s| visible_char_count(&s.text)).sum()
    }

    fn validate(&self) -> Result<(), CatalogueError> {
        let who = format!("pitch script for product {}", self.routing_id);
        if self.sentences.is_empty() {
            return Err(CatalogueError::invariant(who, "script has no sentences"));
        }
        if let Some(i) = self.sentences.iter().position(|s| s.text.trim().is_empty()) {
            return Err(CatalogueError::invariant(
                who,
                format!("sentence {i} is empty"),
            ));
        }
        let chars = self.visible_chars();
        if !(SCRIPT_CHARS_MIN..=SCRIPT_CHARS_MAX).contains(&chars) {
            return Err(CatalogueError::invariant(
                who,
                format!(
                    "script length {chars} outside [{SCRIPT_CHARS_MIN}, {SCRIPT_CHARS_MAX}] characters"
                ),
            ));
        }
        if let Some(w) = self
            .sentences
            .windows(2)
            .position(|w| w[1].arc < w[0].arc)
        {
            return Err(CatalogueError::invariant(
                who,
                format!("arc tags go backwards at sentence {}", w + 1),
            ));
        }
        for stage in [ArcStage::Hook, ArcStage::Explain, ArcStage::Guide, ArcStage::Close] {
            if !self.sentences.iter().any(|s| s.arc == stage) {
                return Err(CatalogueError::invariant(
                    who,
                    format!("arc stage {stage:?} missing"),
                ));
            }
        }
        Ok(())
    }
}

/// Relative weights of the three keyword classes in coverage scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageWeights {
    pub name: f64,
    pub category: f64,
    pub ingredient: f64,
}

impl Default for CoverageWeights {
    fn default() -> Self {
        Self {
            name: 3.0,
            category: 2.0,
            ingredient: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub weights: CoverageWeights,
}

fn default_threshold() -> f64 {
    0.15
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            weights: CoverageWeights::default(),
        }
    }
}

/// Normalized keyword lists per category.
#[derive(Debug, Clone, Default)]
pub struct KeywordTable {
    by_category: Vec<(Category, Vec<String>)>,
}

impl KeywordTable {
    pub fn keywords(&self, category: Category) -> &[String] {
        self.by_category
            .iter()
            .find(|(c, _)| *c == category)
            .map(|(_, k)| k.as_slice())
            .unwrap_or(&[])
    }
}

/// Closed lexicon of off-catalogue terms the claim checker scans for.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimLexicon {
    #[serde(default)]
    pub off_catalogue_ingredients: Vec<String>,
    #[serde(default)]
    pub off_catalogue_products: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalResult<'a> {
    pub record: &'a ProductRecord,
    pub category_hit: Option<Category>,
    pub coverage: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogueError {
    #[error("catalogue parse error: {0}")]
    Parse(String),
    #[error("invariant violated by {subject}: {rule}")]
    Invariant { subject: String, rule: String },
}

impl CatalogueError {
    fn invariant(subject: impl Into<String>, rule: impl Into<String>) -> Self {
        CatalogueError::Invariant {
            subject: subject.into(),
            rule: rule.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKeywords {
    cleanser: Vec<String>,
    serum: Vec<String>,
    moisturizer: Vec<String>,
    sunscreen: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalogue {
    #[serde(default)]
    retrieval: RetrievalConfig,
    keywords: RawKeywords,
    #[serde(default)]
    claim_lexicon: ClaimLexicon,
    glossary: Vec<IngredientGlossaryEntry>,
    products: Vec<ProductRecord>,
    scripts: Vec<PitchScript>,
}

/// The loaded, validated knowledge base.
#[derive(Debug, Clone)]
pub struct Catalogue {
    products: Vec<ProductRecord>,
    glossary: Glossary,
    scripts: Vec<PitchScript>,
    keywords: KeywordTable,
    retrieval: RetrievalConfig,
    lexicon: ClaimLexicon,
    lexicon_terms: Vec<String>,
}

/// Parses and validates a catalogue document.
pub fn load_catalogue(source: &[u8]) -> Result<Catalogue, CatalogueError> {
    let text = std::str::from_utf8(source)
        .map_err(|e| CatalogueError::Parse(format!("not valid UTF-8: {e}")))?;
    let raw: RawCatalogue =
        toml::from_str(text).map_err(|e| CatalogueError::Parse(e.to_string()))?;
    Catalogue::from_parts(
        raw.products,
        raw.glossary,
        raw.scripts,
        raw.keywords,
        raw.retrieval,
        raw.claim_lexicon,
    )
}

impl Catalogue {
    /// The catalogue shipped with the crate.
    pub fn bundled() -> Catalogue {
        load_catalogue(BUNDLED_CATALOGUE.as_bytes()).expect("bundled catalogue is valid")
    }

    /// Raw text of the bundled catalogue document.
    pub fn bundled_source() -> &'static str {
        BUNDLED_CATALOGUE
    }

    fn from_parts(
        products: Vec<ProductRecord>,
        glossary: Vec<IngredientGlossaryEntry>,
        scripts: Vec<PitchScript>,
        keywords: RawKeywords,
        retrieval: RetrievalConfig,
        lexicon: ClaimLexicon,
    ) -> Result<Catalogue, CatalogueError> {
        let glossary = Glossary::new(glossary)?;

        let w = retrieval.weights;
        if !(w.name > 0.0 && w.category > 0.0 && w.ingredient > 0.0) {
            return Err(CatalogueError::invariant(
                "retrieval weights",
                "all coverage weights must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&retrieval.threshold) {
            return Err(CatalogueError::invariant(
                "retrieval threshold",
                "threshold must lie in [0, 1]",
            ));
        }

        let mut by_category = Vec::with_capacity(4);
        for (category, list) in [
            (Category::Cleanser, keywords.cleanser),
            (Category::Serum, keywords.serum),
            (Category::Moisturizer, keywords.moisturizer),
            (Category::Sunscreen, keywords.sunscreen),
        ] {
            let list: Vec<String> = list
                .iter()
                .map(|k| normalize(k))
                .filter(|k| !k.is_empty())
                .collect();
            if list.is_empty() {
                return Err(CatalogueError::invariant(
                    format!("keyword table for {category}"),
                    "at least one keyword required",
                ));
            }
            by_category.push((category, list));
        }

        for term in &lexicon.off_catalogue_ingredients {
            if glossary.contains(term) {
                return Err(CatalogueError::invariant(
                    format!("claim lexicon term {term}"),
                    "off-catalogue ingredient is also a glossary key",
                ));
            }
        }

        let mut ids = HashSet::new();
        let mut names = HashSet::new();
        for p in &products {
            let who = format!("product {} ({})", p.routing_id, p.name);
            if p.name.trim().is_empty() {
                return Err(CatalogueError::invariant(who, "name must be non-empty"));
            }
            if p.disclaimer.trim().is_empty() {
                return Err(CatalogueError::invariant(who, "disclaimer must be non-empty"));
            }
            if !ids.insert(p.routing_id) {
                return Err(CatalogueError::invariant(who, "routing_id must be unique"));
            }
            if !names.insert(p.name.clone()) {
                return Err(CatalogueError::invariant(who, "name must be unique"));
            }
            if let Some(ing) = p.ingredients.iter().find(|i| !glossary.contains(&i.name)) {
                return Err(CatalogueError::invariant(
                    who,
                    format!("ingredient {} is not in the glossary", ing.name),
                ));
            }
            if lexicon.off_catalogue_products.iter().any(|o| *o == p.name) {
                return Err(CatalogueError::invariant(
                    who,
                    "name is listed as an off-catalogue product",
                ));
            }
        }

        let mut scripted = HashSet::new();
        for s in &scripts {
            s.validate()?;
            if !ids.contains(&s.routing_id) {
                return Err(CatalogueError::invariant(
                    format!("pitch script for product {}", s.routing_id),
                    "references an unknown product",
                ));
            }
            if !scripted.insert(s.routing_id) {
                return Err(CatalogueError::invariant(
                    format!("pitch script for product {}", s.routing_id),
                    "more than one script for this product",
                ));
            }
        }
        if let Some(p) = products.iter().find(|p| !scripted.contains(&p.routing_id)) {
            return Err(CatalogueError::invariant(
                format!("product {} ({})", p.routing_id, p.name),
                "has no pitch script",
            ));
        }

        let mut catalogue = Catalogue {
            products,
            glossary,
            scripts,
            keywords: KeywordTable { by_category },
            retrieval,
            lexicon,
            lexicon_terms: Vec::new(),
        };
        catalogue.lexicon_terms = catalogue.collect_lexicon_terms();
        Ok(catalogue)
    }

    pub fn products(&self) -> &[ProductRecord] {
        &self.products
    }

    pub fn glossary(&self) -> &Glossary {
        &self.glossary
    }

    /// Pitch scripts in narration order.
    pub fn scripts(&self) -> &[PitchScript] {
        &self.scripts
    }

    pub fn keywords(&self) -> &KeywordTable {
        &self.keywords
    }

    pub fn retrieval_config(&self) -> &RetrievalConfig {
        &self.retrieval
    }

    pub fn set_retrieval_threshold(&mut self, threshold: f64) {
        self.retrieval.threshold = threshold.clamp(0.0, 1.0);
    }

    pub fn lexicon(&self) -> &ClaimLexicon {
        &self.lexicon
    }

    pub fn product(&self, id: RoutingId) -> Option<&ProductRecord> {
        self.products.iter().find(|p| p.routing_id == id)
    }

    pub fn product_by_name(&self, name: &str) -> Option<&ProductRecord> {
        self.products.iter().find(|p| p.name == name)
    }

    /// Product narrated by the script at `script_index`.
    pub fn script_product(&self, script_index: usize) -> Option<&ProductRecord> {
        self.scripts
            .get(script_index)
            .and_then(|s| self.product(s.routing_id))
    }

    /// Returns the category whose keywords occur most often in the text.
    /// Ties go to the earlier category in [`Category::ALL`].
    pub fn detect_category(&self, comment_text: &str) -> Option<Category> {
        let text = normalize(comment_text);
        let mut best: Option<(Category, usize)> = None;
        for (category, words) in &self.keywords.by_category {
            let hits: usize = words.iter().map(|w| occurrences(&text, w)).sum();
            if hits > 0 && best.is_none_or(|(_, b)| hits > b) {
                best = Some((*category, hits));
            }
        }
        best.map(|(c, _)| c)
    }

    /// Weighted keyword-class coverage of `record` by the comment.
    ///
    /// Each class (name tokens, category keywords, ingredient names) counts
    /// once if any of its keywords occurs in the normalized text. The score is
    /// the hit weight over the total weight of the record's non-empty classes.
    pub fn coverage_score(&self, comment_text: &str, record: &ProductRecord) -> f64 {
        let text = normalize(comment_text);
        let w = self.retrieval.weights;
        let name_tokens = record.name_tokens();
        let category_words = self.keywords.keywords(record.category);
        let ingredient_words: Vec<String> =
            record.ingredients.iter().map(|i| normalize(&i.name)).collect();

        let mut total = 0.0;
        let mut hit = 0.0;
        let classes: [(&[String], f64); 3] = [
            (&name_tokens, w.name),
            (category_words, w.category),
            (&ingredient_words, w.ingredient),
        ];
        for (words, weight) in classes {
            if words.is_empty() {
                continue;
            }
            total += weight;
            if words.iter().any(|k| text.contains(k.as_str())) {
                hit += weight;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            (hit / total).clamp(0.0, 1.0)
        }
    }

    /// Best-covering record among those in the detected category (or all
    /// records when no category is detected), if it meets the threshold.
    /// Ties keep the earlier catalogue entry.
    pub fn retrieve(&self, comment_text: &str) -> Option<RetrievalResult<'_>> {
        let category_hit = self.detect_category(comment_text);
        let mut best: Option<(&ProductRecord, f64)> = None;
        for record in &self.products {
            if category_hit.is_some_and(|c| c != record.category) {
                continue;
            }
            let coverage = self.coverage_score(comment_text, record);
            if best.is_none_or(|(_, b)| coverage > b) {
                best = Some((record, coverage));
            }
        }
        best.filter(|(_, coverage)| *coverage > 0.0 && *coverage >= self.retrieval.threshold)
            .map(|(record, coverage)| RetrievalResult {
                record,
                category_hit,
                coverage,
            })
    }

    /// All keywords associated with a record, normalized.
    pub fn record_keywords(&self, record: &ProductRecord) -> Vec<String> {
        let mut out = record.name_tokens();
        out.extend(self.keywords.keywords(record.category).iter().cloned());
        out.extend(record.ingredients.iter().map(|i| normalize(&i.name)));
        out
    }

    /// Every catalogue-level keyword: category keywords, glossary keys and
    /// product name tokens. Sorted and deduplicated.
    pub fn lexicon_terms(&self) -> &[String] {
        &self.lexicon_terms
    }

    fn collect_lexicon_terms(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, words) in &self.keywords.by_category {
            out.extend(words.iter().cloned());
        }
        out.extend(self.glossary.entries().iter().map(|e| normalize(&e.ingredient)));
        for p in &self.products {
            out.extend(p.name_tokens());
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Renders a record as the product-context block body for a prompt.
///
/// The routing identifier is deliberately absent: only display fields and
/// glossary descriptions are written.
pub fn serialize_for_prompt(record: &ProductRecord, glossary: &Glossary) -> String {
    let mut out = String::new();
    out.push_str(&format!("商品：{}\n", record.name));
    out.push_str(&format!("品类：{}\n", record.category.label()));
    out.push_str("核心成分：\n");
    for ing in &record.ingredients {
        let desc = glossary
            .get(&ing.name)
            .map(|e| e.description.as_str())
            .unwrap_or("");
        out.push_str(&format!("- {}（{}）：{}\n", ing.name, ing.role, desc));
    }
    out.push_str(&format!("质地：{}\n", record.texture));
    out.push_str(&format!("适合肤质：{}\n", record.skin_types.join("、")));
    out.push_str(&format!("使用方法：{}\n", record.usage));
    out.push_str("直播要点：\n");
    for tp in &record.talking_points {
        out.push_str(&format!("- {tp}\n"));
    }
    out.push_str(&format!("合规提示：{}", record.disclaimer));
    out
}
