//! The small string codes (metrics, feature ids, classifier kinds, label
//! column selectors) must parse without panicking, and whatever parses must
//! round-trip through its display form.

#![no_main]

use std::str::FromStr;

use libfuzzer_sys::fuzz_target;

use ifl_core::classifier::ClassifierKind;
use ifl_core::dataset::LabelColumn;
use ifl_core::engine::{FeatureId, MuScope};
use ifl_core::metric::MetricKind;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };

    if let Ok(metric) = MetricKind::from_str(text) {
        let reparsed = MetricKind::from_str(&metric.to_string());
        assert_eq!(reparsed.ok(), Some(metric), "metric {metric} drifted");
    }
    if let Ok(feature) = FeatureId::from_str(text) {
        let reparsed = FeatureId::from_str(&feature.to_string());
        assert_eq!(reparsed.ok(), Some(feature), "feature {feature} drifted");
    }
    if let Ok(scope) = MuScope::from_str(text) {
        let reparsed = MuScope::from_str(&scope.to_string());
        assert_eq!(reparsed.ok(), Some(scope), "scope {scope} drifted");
    }
    if let Ok(kind) = ClassifierKind::from_str(text) {
        let reparsed = ClassifierKind::from_str(&kind.to_string());
        assert_eq!(reparsed.ok(), Some(kind), "classifier {kind} drifted");
    }
    // No display form; parsing just must not panic.
    let _ = LabelColumn::from_str(text);
});
