//! Loader for the RumourEval-2019 directory layout.
//!
//! Thread directories are found anywhere under the root: each holds
//! `structure.json`, `source-tweet/<id>.json` and `replies/<id>.json`. Labels
//! come from key files (any JSON object with `subtaskaenglish` and/or
//! `subtaskbenglish`); key files with `test` in their name mark test threads.
//! Both Twitter and Reddit post payloads are understood.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, warn};
use serde_json::Value;

use super::{finalize_thread, ClaimLabel, Dataset, Reply, Split, Stance, Thread, VeracityLabel};
use crate::error::DataError;

struct Post {
    id: String,
    text: String,
    time: i64,
    reply_to: Option<String>,
}

#[derive(Default)]
struct Keys {
    stance: HashMap<String, String>,
    veracity: HashMap<String, (String, Split)>,
}

fn read_json(path: &Path) -> Result<Value, DataError> {
    let raw = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&raw).map_err(|e| DataError::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn walk(
    dir: &Path,
    files: &mut Vec<PathBuf>,
    thread_dirs: &mut Vec<PathBuf>,
) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io_err)?;
    entries.sort();
    if dir.join("structure.json").is_file() && dir.join("source-tweet").is_dir() {
        thread_dirs.push(dir.to_path_buf());
        return Ok(());
    }
    for p in entries {
        if p.is_dir() {
            walk(&p, files, thread_dirs)?;
        } else if p.extension().is_some_and(|e| e == "json") {
            files.push(p);
        }
    }
    Ok(())
}

fn string_field(v: &Value, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| match v.get(*k)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

fn parse_post(v: &Value, path: &Path) -> Result<Post, DataError> {
    let malformed = |message: &str| DataError::Malformed {
        path: path.to_path_buf(),
        line: 1,
        message: message.to_string(),
    };
    // Reddit payloads wrap the post in data.children[0].data or data.
    let reddit = v
        .pointer("/data/children/0/data")
        .or_else(|| v.get("data").filter(|d| d.is_object()));
    if let Some(d) = reddit {
        let id = string_field(d, &["id"]).ok_or_else(|| malformed("reddit post without id"))?;
        let text = match (
            string_field(d, &["title"]),
            string_field(d, &["selftext", "body"]),
        ) {
            (Some(t), Some(b)) if !b.is_empty() => format!("{t} {b}"),
            (Some(t), _) => t,
            (None, Some(b)) => b,
            (None, None) => String::new(),
        };
        let time =
            d.get("created_utc")
                .or_else(|| d.get("created"))
                .and_then(Value::as_f64)
                .ok_or_else(|| malformed("reddit post without created time"))? as i64;
        let reply_to = string_field(d, &["parent_id"]).map(|p| {
            p.split_once('_')
                .map_or(p.clone(), |(_, id)| id.to_string())
        });
        return Ok(Post {
            id,
            text,
            time,
            reply_to,
        });
    }
    let id = string_field(v, &["id_str", "id"]).ok_or_else(|| malformed("tweet without id"))?;
    let text = string_field(v, &["full_text", "text"]).unwrap_or_default();
    let created =
        string_field(v, &["created_at"]).ok_or_else(|| malformed("tweet without created_at"))?;
    let time = chrono::DateTime::parse_from_str(&created, "%a %b %d %H:%M:%S %z %Y")
        .map_err(|e| malformed(&format!("bad created_at {created:?}: {e}")))?
        .timestamp();
    let reply_to = string_field(v, &["in_reply_to_status_id_str"]);
    Ok(Post {
        id,
        text,
        time,
        reply_to,
    })
}

fn collect_parents(node: &Value, parent: &str, out: &mut HashMap<String, String>) {
    if let Value::Object(map) = node {
        for (child, sub) in map {
            out.insert(child.clone(), parent.to_string());
            collect_parents(sub, child, out);
        }
    }
}

fn load_keys(files: &[PathBuf]) -> Result<Keys, DataError> {
    let mut keys = Keys::default();
    for f in files {
        let v = match read_json(f) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let name = f
            .file_name()
            .map(|n| n.to_string_lossy().to_lowercase())
            .unwrap_or_default();
        let split = if name.contains("test") {
            Split::Test
        } else {
            Split::Train
        };
        if let Some(Value::Object(a)) = v.get("subtaskaenglish") {
            for (id, s) in a {
                if let Some(s) = s.as_str() {
                    keys.stance.insert(id.clone(), s.to_string());
                }
            }
        }
        if let Some(Value::Object(b)) = v.get("subtaskbenglish") {
            for (id, s) in b {
                if let Some(s) = s.as_str() {
                    keys.veracity.insert(id.clone(), (s.to_string(), split));
                }
            }
        }
    }
    Ok(keys)
}

fn load_claims(path: &Path) -> Result<HashMap<String, bool>, DataError> {
    let v = read_json(path)?;
    let obj = v.as_object().ok_or_else(|| DataError::Malformed {
        path: path.to_path_buf(),
        line: 1,
        message: "claim sidecar must be a {reply_id: bool} object".into(),
    })?;
    obj.iter()
        .map(|(k, v)| {
            v.as_bool()
                .map(|b| (k.clone(), b))
                .ok_or_else(|| DataError::Malformed {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!("claim for {k:?} is not a boolean"),
                })
        })
        .collect()
}

/// Platform timestamps occasionally put a reply before its parent. Such
/// replies inherit the parent's time; if the `(time, id)` order still puts
/// them first they are attached to the source instead.
fn repair_order(replies: &mut [Reply], source: &Reply) {
    for _ in 0..replies.len() {
        let times: HashMap<String, i64> = replies.iter().map(|r| (r.id.clone(), r.time)).collect();
        let mut changed = false;
        for r in replies.iter_mut() {
            let pt = r.parent_id.as_ref().and_then(|p| times.get(p)).copied();
            if let Some(pt) = pt.filter(|&pt| pt > r.time) {
                r.time = pt;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    super::sort_replies(replies);
    let mut seen: std::collections::HashSet<String> =
        std::collections::HashSet::from([source.id.clone()]);
    for r in replies.iter_mut() {
        if !r.parent_id.as_ref().is_some_and(|p| seen.contains(p)) {
            debug!("reply {}: parent not earlier, attached to source", r.id);
            r.parent_id = Some(source.id.clone());
        }
        seen.insert(r.id.clone());
    }
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| DataError::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    out.sort();
    Ok(out)
}

/// Loads a RumourEval-2019 tree. Threads labeled `unverified` or lacking a
/// veracity key are skipped with a warning; replies lacking a stance key are
/// dropped (their children move up to the nearest kept ancestor). Replies
/// absent from the claim sidecar default to non-claims.
pub fn load_rumoureval(root: &Path, claim_sidecar: Option<&Path>) -> Result<Dataset, DataError> {
    if !root.is_dir() {
        return Err(DataError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let (mut files, mut thread_dirs) = (Vec::new(), Vec::new());
    walk(root, &mut files, &mut thread_dirs)?;
    let keys = load_keys(&files)?;
    let claims = claim_sidecar.map(load_claims).transpose()?;

    let mut ds = Dataset::default();
    let mut missing_claims = 0usize;
    for dir in thread_dirs {
        let src_files = json_files(&dir.join("source-tweet"))?;
        let Some(src_path) = src_files.first() else {
            warn!("{}: no source post, skipping", dir.display());
            continue;
        };
        let src = parse_post(&read_json(src_path)?, src_path)?;
        let Some((label, split)) = keys.veracity.get(&src.id) else {
            warn!("thread {}: no veracity label, skipping", src.id);
            continue;
        };
        let veracity: VeracityLabel = match label.parse() {
            Ok(v) => v,
            Err(_) => {
                warn!(
                    "thread {}: veracity {label:?} is not two-class, skipping",
                    src.id
                );
                continue;
            }
        };

        let mut parents = HashMap::new();
        collect_parents(&read_json(&dir.join("structure.json"))?, "", &mut parents);

        let mut posts: BTreeMap<String, Post> = BTreeMap::new();
        for p in json_files(&dir.join("replies"))? {
            let post = parse_post(&read_json(&p)?, &p)?;
            if post.id != src.id {
                posts.insert(post.id.clone(), post);
            }
        }

        let parent_of = |id: &str| -> Option<String> {
            parents
                .get(id)
                .filter(|p| !p.is_empty())
                .cloned()
                .or_else(|| posts.get(id).and_then(|p| p.reply_to.clone()))
        };
        let mut replies = Vec::new();
        for post in posts.values() {
            let Some(stance) = keys.stance.get(&post.id) else {
                debug!("reply {}: no stance label, dropped", post.id);
                continue;
            };
            let stance: Stance = stance.parse()?;
            // Climb to the nearest ancestor that is the source or a kept reply.
            let mut parent = parent_of(&post.id);
            let mut hops = 0;
            while let Some(p) = parent.clone() {
                if p == src.id
                    || (posts.contains_key(&p) && keys.stance.contains_key(&p))
                    || hops > posts.len()
                {
                    break;
                }
                parent = parent_of(&p);
                hops += 1;
            }
            let parent = match parent {
                Some(p) if p == src.id || posts.contains_key(&p) => p,
                _ => src.id.clone(),
            };
            let claim = match claims.as_ref().and_then(|c| c.get(&post.id)) {
                Some(&c) => ClaimLabel::from(c),
                None => {
                    missing_claims += 1;
                    ClaimLabel::NonClaim
                }
            };
            replies.push(Reply {
                id: post.id.clone(),
                parent_id: Some(parent),
                text: post.text.clone(),
                time: post.time.max(src.time),
                stance,
                claim,
            });
        }
        let source = Reply {
            id: src.id.clone(),
            parent_id: None,
            text: src.text,
            time: src.time,
            stance: Stance::Root,
            claim: claims
                .as_ref()
                .and_then(|c| c.get(&src.id))
                .map_or(ClaimLabel::Claim, |&c| c.into()),
        };
        repair_order(&mut replies, &source);
        let thread = finalize_thread(Thread::new(src.id, source, replies, veracity))?;
        ds.push(thread, *split)?;
    }
    if missing_claims > 0 {
        warn!("{missing_claims} replies have no claim annotation; defaulting to non-claim");
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn put(path: &Path, v: &Value) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, serde_json::to_string(v).unwrap()).unwrap();
    }

    fn tweet(id: &str, secs: u32, reply_to: Option<&str>) -> Value {
        json!({
            "id_str": id,
            "text": format!("tweet {id}"),
            "created_at": format!("Wed Jan 07 11:07:{secs:02} +0000 2015"),
            "in_reply_to_status_id_str": reply_to,
        })
    }

    fn fixture() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let ev = root.join("twitter-english/charliehebdo/100");
        put(&ev.join("source-tweet/100.json"), &tweet("100", 0, None));
        put(&ev.join("replies/101.json"), &tweet("101", 5, Some("100")));
        put(&ev.join("replies/102.json"), &tweet("102", 3, Some("101")));
        put(&ev.join("replies/103.json"), &tweet("103", 9, Some("102")));
        put(
            &ev.join("structure.json"),
            &json!({"100": {"101": {"102": {"103": []}}}}),
        );
        let ev2 = root.join("twitter-english/ottawa/200");
        put(&ev2.join("source-tweet/200.json"), &tweet("200", 0, None));
        put(&ev2.join("structure.json"), &json!({"200": []}));
        let ev3 = root.join("twitter-english/ottawa/300");
        put(&ev3.join("source-tweet/300.json"), &tweet("300", 0, None));
        put(&ev3.join("structure.json"), &json!({"300": []}));
        put(
            &root.join("train-key.json"),
            &json!({
                "subtaskaenglish": {"101": "support", "102": "deny", "103": "query"},
                "subtaskbenglish": {"100": "false", "200": "unverified"}
            }),
        );
        put(
            &root.join("final-eval-key-test.json"),
            &json!({"subtaskbenglish": {"300": "true"}}),
        );
        dir
    }

    #[test]
    fn loads_tree_labels_and_splits() {
        let dir = fixture();
        let claims = dir.path().join("claims.json");
        fs::write(&claims, r#"{"101": true}"#).unwrap();
        let ds = load_rumoureval(dir.path(), Some(&claims)).unwrap();
        assert_eq!(ds.len(), 2);
        let t = &ds.threads[0];
        assert_eq!(t.thread_id, "100");
        assert_eq!(t.veracity, VeracityLabel::Misinformation);
        // 102 predates its parent 101 and inherits its timestamp.
        let ids: Vec<_> = t.replies.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["101", "102", "103"]);
        assert_eq!(t.replies[1].time, t.replies[0].time);
        assert_eq!(t.replies[1].parent_id.as_deref(), Some("101"));
        assert_eq!(t.replies[2].parent_id.as_deref(), Some("102"));
        assert_eq!(t.replies[0].stance, Stance::Support);
        assert_eq!(
            t.replies.iter().find(|r| r.id == "101").unwrap().claim,
            ClaimLabel::Claim
        );
        assert_eq!(
            t.replies.iter().find(|r| r.id == "103").unwrap().claim,
            ClaimLabel::NonClaim
        );
        assert_eq!(ds.split_of("100"), Some(Split::Train));
        assert_eq!(ds.split_of("300"), Some(Split::Test));
        assert_eq!(ds.split_of("200"), None);
    }
}
