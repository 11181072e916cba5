//! CSV ingestion must never panic, and anything it accepts must survive a
//! write/reparse cycle unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;

use ifl_core::dataset::{CsvOptions, Dataset, LabelColumn};

fuzz_target!(|data: &[u8]| {
    let Some((&flags, body)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(body) else {
        return;
    };
    let opts = CsvOptions {
        has_header: flags & 1 != 0,
        label_column: match flags & 0b110 {
            0b010 => LabelColumn::Index(usize::from(flags >> 4)),
            0b100 => LabelColumn::Name("y".into()),
            _ => LabelColumn::Last,
        },
        delimiter: if flags & 0b1000 != 0 { b';' } else { b',' },
        label_order: None,
    };
    let Ok(ds) = Dataset::from_csv_str("fuzz", text, &opts) else {
        return;
    };

    let mut written = Vec::new();
    ds.write_csv(&mut written)
        .expect("a parsed dataset always serializes");
    let reread_opts = CsvOptions {
        has_header: ds.header().is_some(),
        label_column: LabelColumn::Last,
        delimiter: b',',
        // Pin the class ids: the writer emits rows in dataset order, which
        // may differ from the first-seen order of the original text.
        label_order: Some(ds.label_names().to_vec()),
    };
    let text = String::from_utf8(written).expect("the writer emits UTF-8");
    let back = Dataset::from_csv_str("fuzz", &text, &reread_opts)
        .expect("a written dataset always parses back");

    assert_eq!(back.features(), ds.features());
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.label_names(), ds.label_names());
    assert_eq!(back.header(), ds.header());
});
