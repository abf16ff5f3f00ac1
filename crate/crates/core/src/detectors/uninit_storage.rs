//! A-c-US: local struct or array that defaults to an unset storage pointer.

use super::*;
use crate::frontend::{StorageLocation, TypeClass};

pub fn detect_uninitialized_storage(model: &SourceModel) -> Vec<Finding> {
    let mut out = Vec::new();
    for (contract, function) in model.functions() {
        for v in function.locals() {
            let composite = matches!(v.type_class, TypeClass::UserComposite | TypeClass::Array);
            let storage = matches!(
                v.storage_location,
                StorageLocation::Storage | StorageLocation::Default
            );
            if composite && storage && !v.has_initializer {
                let message = format!(
                    "local `{} {}` is an uninitialized storage reference and aliases slot 0",
                    v.type_text, v.name
                );
                out.push(finding(
                    model,
                    "A-c-US",
                    Some(contract),
                    Some(function),
                    v.span,
                    message,
                    vec![],
                ));
            }
        }
    }
    out
}
