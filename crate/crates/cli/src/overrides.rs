use serde_json::Value;

/// Applies `path.to.field=value` to a JSON tree. The value is parsed as JSON
/// when possible and taken as a bare string otherwise. Numeric segments index
/// arrays. Missing object keys are created so that the config's own
/// unknown-field check reports them.
pub fn apply(root: &mut Value, spec: &str) -> Result<(), String> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("--set expects key=value, got {spec:?}"))?;
    if path.is_empty() {
        return Err(format!("--set has an empty key in {spec:?}"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for seg in path.split('.') {
        node = match node {
            Value::Object(map) => map.entry(seg).or_insert(Value::Null),
            Value::Array(items) => {
                let len = items.len();
                let i: usize = seg
                    .parse()
                    .map_err(|_| format!("{path}: {seg:?} is not an array index"))?;
                items
                    .get_mut(i)
                    .ok_or_else(|| format!("{path}: index {i} out of range (len {len})"))?
            }
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut()
                    .unwrap()
                    .entry(seg)
                    .or_insert(Value::Null)
            }
            _ => return Err(format!("{path}: cannot descend into a scalar at {seg:?}")),
        };
    }
    *node = value;
    Ok(())
}
