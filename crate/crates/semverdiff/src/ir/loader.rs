//! Snapshot loading.
//!
//! A version of the library lives in one directory: every `*.mvil` file in it
//! is parsed, the classes are merged, and the result is checked as a whole.
//! Snapshot-level checks cover what a single file cannot see: calls into
//! classes that exist here must resolve exactly (including the declared
//! return type), and field references must name declared fields. Calls whose
//! target class is absent from the snapshot are external dependencies and are
//! left unresolved by design.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use super::parser::parse_module;
use super::{ClassDef, ModuleSnapshot, StatementKind, Version};

/// Errors produced while loading one snapshot directory.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no .mvil files in {}", .0.display())]
    EmptySnapshot(PathBuf),
    #[error("{path}:\n{rendered}")]
    Parse { path: String, rendered: String },
    #[error("class `{class}` defined in both {first} and {second}")]
    DuplicateClass {
        class: String,
        first: String,
        second: String,
    },
    #[error("no version given and no version.txt in {}", .0.display())]
    MissingVersion(PathBuf),
    #[error("invalid version string `{0}` (expected MAJOR.MINOR.PATCH)")]
    InvalidVersion(String),
    #[error("snapshot resolution failed:\n{0}")]
    Resolution(String),
}

/// Loads and validates the snapshot stored in `dir`.
///
/// The version comes from `version_override` when given, otherwise from a
/// `version.txt` file next to the sources.
pub fn load_snapshot(
    dir: &Path,
    version_override: Option<Version>,
) -> Result<ModuleSnapshot, LoadError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|source| LoadError::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "mvil"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(LoadError::EmptySnapshot(dir.to_path_buf()));
    }

    let version = match version_override {
        Some(v) => v,
        None => {
            let version_path = dir.join("version.txt");
            let text = std::fs::read_to_string(&version_path)
                .map_err(|_| LoadError::MissingVersion(dir.to_path_buf()))?;
            Version::parse(&text)
                .ok_or_else(|| LoadError::InvalidVersion(text.trim().to_string()))?
        }
    };

    let sources: Vec<(String, String)> = paths
        .iter()
        .map(|path| {
            let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
                path: path.clone(),
                source,
            })?;
            Ok((path.display().to_string(), text))
        })
        .collect::<Result<_, LoadError>>()?;
    let borrowed: Vec<(&str, &str)> = sources
        .iter()
        .map(|(name, text)| (name.as_str(), text.as_str()))
        .collect();
    snapshot_from_sources(&borrowed, version)
}

/// Builds a validated snapshot from in-memory sources, each a
/// `(display name, MVIL text)` pair. Files are parsed in parallel; merging
/// and the snapshot-wide checks run in the given order, so errors are
/// deterministic.
pub fn snapshot_from_sources(
    sources: &[(&str, &str)],
    version: Version,
) -> Result<ModuleSnapshot, LoadError> {
    let parsed: Vec<Result<Vec<ClassDef>, LoadError>> = sources
        .par_iter()
        .map(|(name, text)| {
            parse_module(text).map_err(|diags| LoadError::Parse {
                path: name.to_string(),
                rendered: diags
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join("\n"),
            })
        })
        .collect();

    let mut classes: BTreeMap<String, ClassDef> = BTreeMap::new();
    let mut owner: BTreeMap<String, String> = BTreeMap::new();
    for ((name, _), result) in sources.iter().zip(parsed) {
        for class in result? {
            if let Some(first) = owner.get(&class.name) {
                return Err(LoadError::DuplicateClass {
                    class: class.name,
                    first: first.clone(),
                    second: name.to_string(),
                });
            }
            owner.insert(class.name.clone(), name.to_string());
            classes.insert(class.name.clone(), class);
        }
    }

    let snapshot = ModuleSnapshot { version, classes };
    let errors = resolution_errors(&snapshot);
    if errors.is_empty() {
        Ok(snapshot)
    } else {
        Err(LoadError::Resolution(errors.join("\n")))
    }
}

/// Snapshot-wide resolution checks. Returns one message per violation, in
/// deterministic class/method/statement order.
fn resolution_errors(snapshot: &ModuleSnapshot) -> Vec<String> {
    let mut errors = Vec::new();
    for class in snapshot.classes.values() {
        for method in class.methods_ordered() {
            let here = format!("in {}", method.signature.display_string());
            for stmt in &method.statements {
                match &stmt.kind {
                    StatementKind::Call { callee, args, .. } => {
                        if args.len() != callee.param_types.len() {
                            errors.push(format!(
                                "call to {} passes {} argument(s) for {} parameter(s) ({here})",
                                callee.display_string(),
                                args.len(),
                                callee.param_types.len()
                            ));
                        }
                        let Some(target_class) = snapshot.classes.get(&callee.class_name) else {
                            continue;
                        };
                        let key = (callee.method_name.clone(), callee.param_types.clone());
                        match target_class.methods.get(&key) {
                            Some(target) => {
                                if target.signature.return_type != callee.return_type {
                                    errors.push(format!(
                                        "call declares {} but {} returns {} ({here})",
                                        callee.display_string(),
                                        target.signature.display_string(),
                                        target.signature.return_type
                                    ));
                                }
                            }
                            None => errors.push(format!(
                                "unresolved callee {}: class `{}` has no matching method ({here})",
                                callee.display_string(),
                                callee.class_name
                            )),
                        }
                    }
                    StatementKind::FieldLoad { class, field, .. }
                    | StatementKind::FieldStore { class, field, .. } => {
                        match snapshot.classes.get(class) {
                            Some(class_def) => {
                                if class_def.field_type(field).is_none() {
                                    errors.push(format!(
                                        "class `{class}` has no field `{field}` ({here})"
                                    ));
                                }
                            }
                            None => errors.push(format!(
                                "field reference `{class}.{field}` targets a class not in this snapshot ({here})"
                            )),
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(text: &str) -> Version {
        Version::parse(text).unwrap()
    }

    #[test]
    fn loads_sorted_files_and_version_txt() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("b.mvil"),
            "class B { method public void go() {\nentry:\n  return;\n} }",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("a.mvil"),
            "class A { method public void go() {\nentry:\n  call B.go():void;\n  return;\n} }",
        )
        .unwrap();
        std::fs::write(dir.path().join("version.txt"), "1.2.3\n").unwrap();
        let snapshot = load_snapshot(dir.path(), None).unwrap();
        assert_eq!(snapshot.version, v("1.2.3"));
        assert_eq!(snapshot.classes.len(), 2);
        let api = Signature::parse_str("B.go():void").unwrap();
        assert!(!snapshot.is_external(&api));
    }

    use crate::ir::Signature;

    #[test]
    fn missing_version_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("a.mvil"),
            "class A { method public void go() {\nentry:\n  return;\n} }",
        )
        .unwrap();
        assert!(matches!(
            load_snapshot(dir.path(), None),
            Err(LoadError::MissingVersion(_))
        ));
        assert!(load_snapshot(dir.path(), Some(v("0.1.0"))).is_ok());
    }

    #[test]
    fn duplicate_class_across_files_is_rejected() {
        let err = snapshot_from_sources(
            &[("x.mvil", "class A { }"), ("y.mvil", "class A { }")],
            v("1.0.0"),
        )
        .unwrap_err();
        assert!(matches!(err, LoadError::DuplicateClass { .. }));
    }

    #[test]
    fn return_type_mismatch_against_resolved_callee_fails() {
        let err = snapshot_from_sources(
            &[(
                "m.mvil",
                r#"
class A {
  method public int f() {
  entry:
    r = call A.g():long;
    x = const #0;
    return x;
  }
  method public int g() {
  entry:
    x = const #1;
    return x;
  }
}
"#,
            )],
            v("1.0.0"),
        )
        .unwrap_err();
        let LoadError::Resolution(msg) = err else {
            panic!("expected resolution error");
        };
        assert!(msg.contains("A.g():long"), "{msg}");
    }

    #[test]
    fn missing_method_on_known_class_fails_but_external_class_is_fine() {
        let known_missing = snapshot_from_sources(
            &[(
                "m.mvil",
                r#"
class A {
  method public void f() {
  entry:
    call A.nothere():void;
    return;
  }
}
"#,
            )],
            v("1.0.0"),
        );
        assert!(matches!(known_missing, Err(LoadError::Resolution(_))));

        let external = snapshot_from_sources(
            &[(
                "m.mvil",
                r#"
class A {
  method public void f() {
  entry:
    call Log.write():void;
    return;
  }
}
"#,
            )],
            v("1.0.0"),
        );
        let snapshot = external.unwrap();
        let callee = Signature::parse_str("Log.write():void").unwrap();
        assert!(snapshot.is_external(&callee));
    }

    #[test]
    fn field_references_must_resolve() {
        let err = snapshot_from_sources(
            &[(
                "m.mvil",
                r#"
class A {
  field int x;
  method public int f() {
  entry:
    r = getfield this, A.y;
    return r;
  }
}
"#,
            )],
            v("1.0.0"),
        )
        .unwrap_err();
        assert!(matches!(err, LoadError::Resolution(_)));
    }

    #[test]
    fn argument_count_must_match_declared_callee_parameters() {
        let err = snapshot_from_sources(
            &[(
                "m.mvil",
                r#"
class A {
  method public void f() {
  entry:
    a = const #1;
    call Ext.log(int,int):void a;
    return;
  }
}
"#,
            )],
            v("1.0.0"),
        )
        .unwrap_err();
        let LoadError::Resolution(msg) = err else {
            panic!("expected resolution error");
        };
        assert!(msg.contains("1 argument(s) for 2 parameter(s)"), "{msg}");
    }
}
