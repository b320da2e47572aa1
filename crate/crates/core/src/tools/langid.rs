//! Language identification.
//!
//! [`TrigramDetector`] is a small naive-Bayes classifier over character
//! trigrams, trained on bundled sample paragraphs, with a script shortcut for
//! non-Latin writing systems. It is good enough for chunk-level gating in
//! tests; deployments can plug in any [`LanguageIdentifier`].

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangIdResult {
    pub lang: String,
    pub confidence: f64,
}

pub trait LanguageIdentifier: Send + Sync {
    fn detect(&self, text: &str) -> LangIdResult;
}

const SAMPLES: &[(&str, &str)] = &[
    (
        "en",
        "The history of the city is closely connected with the river and the trade that \
         grew along its banks. In the early years most people worked in the fields, but \
         over time the town became known for its markets, its schools and its churches. \
         Today it is one of the largest cities in the region and attracts thousands of \
         visitors every year who come to see the old bridge, the museum and the famous \
         gardens. The weather is usually mild, although winters can be cold and wet. \
         There are many things to do and places to eat, and the people who live here are \
         friendly and proud of where they come from. What would you like to know about \
         this place? We have written a short guide with the most important information \
         for travellers, including where to stay, how to get around and which events \
         should not be missed during the summer months.",
    ),
    (
        "fr",
        "L'histoire de la ville est étroitement liée au fleuve et au commerce qui s'est \
         développé le long de ses rives. Dans les premières années, la plupart des gens \
         travaillaient dans les champs, mais avec le temps la ville est devenue célèbre \
         pour ses marchés, ses écoles et ses églises. Aujourd'hui c'est l'une des plus \
         grandes villes de la région et elle attire des milliers de visiteurs chaque \
         année qui viennent voir le vieux pont, le musée et les jardins. Le temps est \
         généralement doux, même si les hivers peuvent être froids et humides. La sûreté \
         nucléaire et la sécurité des habitants sont des questions importantes pour les \
         autorités locales, qui publient chaque année un rapport sur la situation.",
    ),
    (
        "de",
        "Die Geschichte der Stadt ist eng mit dem Fluss und dem Handel verbunden, der sich \
         entlang seiner Ufer entwickelt hat. In den ersten Jahren arbeiteten die meisten \
         Menschen auf den Feldern, aber mit der Zeit wurde die Stadt für ihre Märkte, ihre \
         Schulen und ihre Kirchen bekannt. Heute ist sie eine der größten Städte der Region \
         und zieht jedes Jahr tausende Besucher an, die die alte Brücke, das Museum und die \
         berühmten Gärten sehen wollen. Das Wetter ist meistens mild, obwohl die Winter kalt \
         und nass sein können. Der klassische jüdische Mann ist eine Figur, die in vielen \
         Büchern beschrieben wird, und die Leute hier sind freundlich und stolz auf ihre Heimat.",
    ),
    (
        "es",
        "La historia de la ciudad está estrechamente ligada al río y al comercio que creció \
         a lo largo de sus orillas. En los primeros años la mayoría de la gente trabajaba en \
         los campos, pero con el tiempo la ciudad se hizo famosa por sus mercados, sus \
         escuelas y sus iglesias. Hoy es una de las ciudades más grandes de la región y \
         atrae a miles de visitantes cada año que vienen a ver el puente viejo, el museo y \
         los jardines. El tiempo suele ser templado, aunque los inviernos pueden ser fríos \
         y húmedos. Hay muchas cosas que hacer y lugares donde comer, y la gente que vive \
         aquí es amable y está orgullosa de su tierra.",
    ),
    (
        "pt",
        "A história da cidade está intimamente ligada ao rio e ao comércio que cresceu ao \
         longo das suas margens. Nos primeiros anos a maioria das pessoas trabalhava nos \
         campos, mas com o tempo a cidade tornou-se conhecida pelos seus mercados, as suas \
         escolas e as suas igrejas. Hoje é uma das maiores cidades da região e atrai milhares \
         de visitantes todos os anos que vêm ver a ponte velha, o museu e os jardins. O homem \
         suprimido é um livro publicado há muitos anos. Os melhores escolas em Jersey são \
         conhecidas, e o tempo costuma ser ameno, embora os invernos possam ser frios e \
         húmidos. Não há muitas coisas que não se possam fazer aqui.",
    ),
    (
        "it",
        "La storia della città è strettamente legata al fiume e al commercio che è cresciuto \
         lungo le sue rive. Nei primi anni la maggior parte delle persone lavorava nei campi, \
         ma con il tempo la città è diventata famosa per i suoi mercati, le sue scuole e le \
         sue chiese. Oggi è una delle città più grandi della regione e attira migliaia di \
         visitatori ogni anno che vengono a vedere il vecchio ponte, il museo e i giardini. \
         Il tempo è di solito mite, anche se gli inverni possono essere freddi e umidi. Ci \
         sono molte cose da fare e posti dove mangiare, e la gente che vive qui è gentile.",
    ),
    (
        "nl",
        "De geschiedenis van de stad is nauw verbonden met de rivier en de handel die langs \
         de oevers is gegroeid. In de eerste jaren werkten de meeste mensen op het land, \
         maar na verloop van tijd werd de stad bekend om haar markten, haar scholen en haar \
         kerken. Vandaag is het een van de grootste steden van de regio en trekt het elk \
         jaar duizenden bezoekers die de oude brug, het museum en de beroemde tuinen komen \
         bekijken. Het weer is meestal zacht, hoewel de winters koud en nat kunnen zijn. Er \
         zijn veel dingen te doen en plekken om te eten, en de mensen die hier wonen zijn \
         vriendelijk en trots op hun stad.",
    ),
];

fn trigrams(text: &str) -> Vec<[char; 3]> {
    let mut out = Vec::new();
    for word in text.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
        let mut chars: Vec<char> = Vec::with_capacity(word.len() + 2);
        chars.push(' ');
        for c in word.chars() {
            chars.extend(c.to_lowercase());
        }
        chars.push(' ');
        for w in chars.windows(3) {
            out.push([w[0], w[1], w[2]]);
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Profile {
    lang: String,
    counts: BTreeMap<[char; 3], u32>,
    total: u32,
}

#[derive(Debug, Clone)]
pub struct TrigramDetector {
    profiles: Vec<Profile>,
    vocab: usize,
    /// Posterior temperature; larger values soften confidences.
    temperature: f64,
}

/// (lang, predicate over chars) for scripts that identify a language alone.
const SCRIPTS: &[(&str, fn(char) -> bool)] = &[
    ("zh", |c| matches!(c, '\u{4e00}'..='\u{9fff}' | '\u{3400}'..='\u{4dbf}')),
    ("ja", |c| matches!(c, '\u{3040}'..='\u{30ff}')),
    ("ko", |c| matches!(c, '\u{ac00}'..='\u{d7af}' | '\u{1100}'..='\u{11ff}')),
    ("ru", |c| matches!(c, '\u{0400}'..='\u{04ff}')),
    ("el", |c| matches!(c, '\u{0370}'..='\u{03ff}')),
    ("ar", |c| matches!(c, '\u{0600}'..='\u{06ff}')),
    ("hi", |c| matches!(c, '\u{0900}'..='\u{097f}')),
    ("he", |c| matches!(c, '\u{0590}'..='\u{05ff}')),
];

impl Default for TrigramDetector {
    fn default() -> Self {
        Self::from_samples(SAMPLES.iter().map(|&(l, t)| (l, t)))
    }
}

impl TrigramDetector {
    pub fn from_samples<'a, I>(samples: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut profiles: Vec<Profile> = Vec::new();
        let mut all = BTreeMap::new();
        for (lang, text) in samples {
            let mut counts = BTreeMap::new();
            let mut total = 0;
            for t in trigrams(text) {
                *counts.entry(t).or_insert(0) += 1;
                all.insert(t, ());
                total += 1;
            }
            profiles.push(Profile {
                lang: lang.into(),
                counts,
                total,
            });
        }
        TrigramDetector {
            profiles,
            vocab: all.len() + 1,
            temperature: 2.0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    /// Log-likelihood of the text under each bundled profile.
    fn scores(&self, grams: &[[char; 3]]) -> Vec<f64> {
        self.profiles
            .iter()
            .map(|p| {
                grams
                    .iter()
                    .map(|g| {
                        let c = p.counts.get(g).copied().unwrap_or(0) as f64;
                        libm::log((c + 1.0) / (p.total as f64 + self.vocab as f64))
                    })
                    .sum()
            })
            .collect()
    }
}

impl LanguageIdentifier for TrigramDetector {
    fn detect(&self, text: &str) -> LangIdResult {
        let letters: Vec<char> = text.chars().filter(|c| c.is_alphabetic()).collect();
        if letters.is_empty() {
            return LangIdResult {
                lang: "und".into(),
                confidence: 0.0,
            };
        }
        for (lang, is_script) in SCRIPTS {
            let n = letters.iter().filter(|&&c| is_script(c)).count();
            if 2 * n > letters.len() {
                return LangIdResult {
                    lang: (*lang).into(),
                    confidence: n as f64 / letters.len() as f64,
                };
            }
        }
        let grams = trigrams(text);
        let scores = self.scores(&grams);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores
            .iter()
            .map(|s| libm::exp((s - max) / self.temperature))
            .collect();
        let total: f64 = weights.iter().sum();
        let (best, w) = weights
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc });
        LangIdResult {
            lang: self.profiles[best].lang.clone(),
            confidence: w / total,
        }
    }
}

/// Always answers with a fixed result. Useful for exercising thresholds.
#[derive(Debug, Clone)]
pub struct FixedLangId(pub LangIdResult);

impl LanguageIdentifier for FixedLangId {
    fn detect(&self, _text: &str) -> LangIdResult {
        self.0.clone()
    }
}
