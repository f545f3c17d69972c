use std::io::Write;

use super::FeatureVector;
use crate::error::{Error, Result};

/// Writes one row per vector: `subject_id,label` then the features. All rows
/// must share the first row's name sequence.
pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureVector]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = rows.first() else {
        return Ok(());
    };
    let mut header = vec!["subject_id", "label"];
    header.extend(&first.names);
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        if row.names != first.names {
            return Err(Error::Data("feature rows cover different sensor sets".into()));
        }
        let (subject, label) = row
            .segment
            .as_ref()
            .map(|s| (s.subject_id.clone(), s.label.to_string()))
            .unwrap_or_default();
        let mut record = vec![subject, label];
        record.extend(row.values.iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(format!("csv: {e}")))?;
    Ok(())
}
