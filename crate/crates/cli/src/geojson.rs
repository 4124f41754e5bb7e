//! GeoJSON (RFC 7946) views of models, anomalies and events. Positions are
//! `[lon, lat]`; every output is a single FeatureCollection.

use serde_json::{json, Value};

use m3fed_core::events::AnomalyEvent;
use m3fed_core::inference::AnomalyRow;
use m3fed_core::model::M3Model;

fn collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

fn point(lon: f64, lat: f64, properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": { "type": "Point", "coordinates": [lon, lat] },
        "properties": properties,
    })
}

/// One Point per prototype, at its mean position.
pub fn model_features(model: &M3Model) -> Value {
    let features = model
        .cells()
        .flat_map(|c| {
            c.prototypes.iter().map(move |p| {
                point(
                    p.mean[0],
                    p.mean[1],
                    json!({
                        "count": p.count,
                        "mean_sog": p.mean[2],
                        "mean_cog": p.mean[3],
                        "cell_row": c.index.row,
                        "cell_col": c.index.col,
                    }),
                )
            })
        })
        .collect();
    collection(features)
}

/// One Point per row. `p_value` is null for records no prototype reached.
pub fn anomaly_features<'a, I: IntoIterator<Item = &'a AnomalyRow>>(rows: I) -> Value {
    let features = rows
        .into_iter()
        .map(|r| {
            point(
                r.lon,
                r.lat,
                json!({
                    "mmsi": r.mmsi,
                    "timestamp": r.timestamp.to_rfc3339(),
                    "verdict": r.verdict.as_str(),
                    "p_value": r.p_value,
                }),
            )
        })
        .collect();
    collection(features)
}

/// One LineString per event through its records in time order. A LineString
/// needs two positions, so a single-record event repeats its position.
pub fn event_features(events: &[AnomalyEvent]) -> Value {
    let features = events
        .iter()
        .map(|e| {
            let mut coords: Vec<[f64; 2]> = e.records.iter().map(|r| [r.lon, r.lat]).collect();
            if coords.len() == 1 {
                coords.push(coords[0]);
            }
            json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": coords },
                "properties": {
                    "mmsi": e.mmsi,
                    "start": e.start.to_rfc3339(),
                    "duration_s": e.duration_s(),
                    "n_records": e.records.len(),
                    "main_type": e.main_type.as_str(),
                },
            })
        })
        .collect();
    collection(features)
}
