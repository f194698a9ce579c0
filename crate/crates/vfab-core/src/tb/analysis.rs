//! Analysis ports: synchronous broadcast from monitors to scoreboards,
//! predictors and coverage collectors.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::rc::Rc;

/// Broadcast port. Publishing delivers the item to every subscriber in
/// connection order, synchronously within the current timestep.
pub struct AnalysisPort<T> {
    subs: Rc<RefCell<Vec<Subscriber<T>>>>,
}

struct Subscriber<T> {
    name: String,
    cb: Rc<dyn Fn(&T)>,
}

impl<T> Clone for AnalysisPort<T> {
    fn clone(&self) -> Self {
        AnalysisPort {
            subs: self.subs.clone(),
        }
    }
}

impl<T: 'static> AnalysisPort<T> {
    pub fn new() -> Self {
        AnalysisPort {
            subs: Rc::new(RefCell::new(Vec::new())),
        }
    }

    pub fn publish(&self, item: &T) {
        // Snapshot so a callback cannot invalidate the iteration.
        let subs: Vec<Rc<dyn Fn(&T)>> =
            self.subs.borrow().iter().map(|s| s.cb.clone()).collect();
        for cb in subs {
            cb(item);
        }
    }

    pub fn subscribe(&self, name: &str, cb: Rc<dyn Fn(&T)>) {
        self.subs.borrow_mut().push(Subscriber {
            name: name.to_string(),
            cb,
        });
    }

    pub fn subscriber_names(&self) -> Vec<String> {
        self.subs.borrow().iter().map(|s| s.name.clone()).collect()
    }
}

impl<T: 'static> Default for AnalysisPort<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Registry slot for a declared port.
pub(crate) struct PortEntry {
    pub type_id: TypeId,
    pub type_name: &'static str,
    pub port: Box<dyn Any>,
}

/// Registry slot for a declared export (a named callback).
pub(crate) struct ExportEntry {
    pub type_id: TypeId,
    pub type_name: &'static str,
    pub cb: Box<dyn Any>,
}

impl PortEntry {
    pub fn new<T: 'static>(port: AnalysisPort<T>) -> Self {
        PortEntry {
            type_id: TypeId::of::<T>(),
            type_name: std::any::type_name::<T>(),
            port: Box::new(port),
        }
    }

    pub fn downcast<T: 'static>(&self) -> Option<&AnalysisPort<T>> {
        self.port.downcast_ref::<AnalysisPort<T>>()
    }
}

impl ExportEntry {
    pub fn new<T: 'static>(cb: Rc<dyn Fn(&T)>) -> Self {
        ExportEntry {
            type_id: TypeId::of::<T>(),
            type_name: std::any::type_name::<T>(),
            cb: Box::new(cb),
        }
    }

    pub fn downcast<T: 'static>(&self) -> Option<Rc<dyn Fn(&T)>> {
        self.cb.downcast_ref::<Rc<dyn Fn(&T)>>().cloned()
    }
}
