use std::cell::RefCell;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::{Array4, Real, Shape};
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Adjoint of one recorded op. Receives the output gradient and, per input,
/// whether that input needs a gradient; returns one optional gradient per
/// input in call order.
pub(crate) type BackwardFn<T> = Box<dyn FnOnce(&Array4<T>, &[bool]) -> Vec<Option<Array4<T>>>>;

struct Node<T> {
    parents: Vec<Option<NodeId>>,
    backward: Option<BackwardFn<T>>,
    shape: Shape,
    leaf: bool,
}

struct TapeState<T> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Records differentiable ops in creation (hence topological) order.
///
/// Single-threaded by construction. Ops whose inputs carry no graph link
/// compute their value and record nothing.
pub struct Tape<T> {
    id: u64,
    state: RefCell<TapeState<T>>,
    fault: Option<Fault>,
}

/// A deliberate adjoint bug, used to confirm the gradient checker catches
/// real mistakes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// SimpleGate back-propagates the negated gradient.
    SimpleGateSign,
}

/// A value plus its optional link into a [`Tape`].
#[derive(Clone)]
pub struct Tensor4<T> {
    value: Arc<Array4<T>>,
    link: Option<(u64, NodeId)>,
}

impl<T: Real> std::fmt::Debug for Tensor4<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor4")
            .field("shape", &self.shape())
            .field("node", &self.node())
            .finish()
    }
}

impl<T: Real> Tensor4<T> {
    /// A graph-free tensor.
    pub fn constant(value: Array4<T>) -> Self {
        Tensor4 {
            value: Arc::new(value),
            link: None,
        }
    }

    pub fn shape(&self) -> Shape {
        self.value.shape()
    }

    pub fn value(&self) -> &Array4<T> {
        &self.value
    }

    pub fn shared_value(&self) -> Arc<Array4<T>> {
        Arc::clone(&self.value)
    }

    pub fn requires_grad(&self) -> bool {
        self.link.is_some()
    }

    pub fn node(&self) -> Option<NodeId> {
        self.link.map(|(_, n)| n)
    }

    /// Same value without graph linkage.
    pub fn detach(&self) -> Self {
        Tensor4 {
            value: Arc::clone(&self.value),
            link: None,
        }
    }

    pub fn into_array(self) -> Array4<T> {
        Arc::try_unwrap(self.value).unwrap_or_else(|shared| (*shared).clone())
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            state: RefCell::new(TapeState {
                nodes: Vec::new(),
                consumed: false,
            }),
            fault: None,
        }
    }

    /// A tape whose ops misbehave as described by `fault`.
    pub fn with_fault(fault: Option<Fault>) -> Self {
        Tape { fault, ..Self::new() }
    }

    pub fn fault(&self) -> Option<Fault> {
        self.fault
    }

    /// Number of recorded nodes (leaves included).
    pub fn len(&self) -> usize {
        self.state.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Register a leaf. With `requires_grad` unset, no node is allocated.
    pub fn leaf(&self, value: Array4<T>, requires_grad: bool) -> Tensor4<T> {
        if !requires_grad {
            return Tensor4::constant(value);
        }
        let shape = value.shape();
        let mut st = self.state.borrow_mut();
        let id = st.nodes.len();
        st.nodes.push(Node {
            parents: Vec::new(),
            backward: None,
            shape,
            leaf: true,
        });
        Tensor4 {
            value: Arc::new(value),
            link: Some((self.id, id)),
        }
    }

    /// Attach `value` as the output of an op over `inputs`. The adjoint is
    /// only stored when at least one input is linked into this tape.
    pub(crate) fn record(
        &self,
        value: Array4<T>,
        inputs: &[&Tensor4<T>],
        backward: impl FnOnce(&Array4<T>, &[bool]) -> Vec<Option<Array4<T>>> + 'static,
    ) -> Result<Tensor4<T>> {
        let mut parents = Vec::with_capacity(inputs.len());
        let mut any = false;
        for t in inputs {
            match t.link {
                Some((tape, node)) if tape == self.id => {
                    parents.push(Some(node));
                    any = true;
                }
                Some(_) => return Err(Error::ForeignTensor),
                None => parents.push(None),
            }
        }
        if !any {
            return Ok(Tensor4::constant(value));
        }
        let mut st = self.state.borrow_mut();
        if st.consumed {
            return Err(Error::TapeConsumed);
        }
        let id = st.nodes.len();
        st.nodes.push(Node {
            parents,
            backward: Some(Box::new(backward)),
            shape: value.shape(),
            leaf: false,
        });
        Ok(Tensor4 {
            value: Arc::new(value),
            link: Some((self.id, id)),
        })
    }

    /// Reverse sweep from a scalar loss. Consumes the tape: adjoint closures
    /// run once and are dropped, so a second call is rejected.
    pub fn backward(&self, loss: &Tensor4<T>) -> Result<Gradients<T>> {
        if loss.shape() != Shape::scalar() {
            return Err(Error::NonScalarLoss(loss.shape()));
        }
        let root = match loss.link {
            Some((tape, node)) if tape == self.id => node,
            Some(_) => return Err(Error::ForeignTensor),
            None => return Err(Error::Detached),
        };
        let mut st = self.state.borrow_mut();
        if st.consumed {
            return Err(Error::TapeConsumed);
        }
        st.consumed = true;

        let mut grads: Vec<Option<Array4<T>>> = (0..st.nodes.len()).map(|_| None).collect();
        grads[root] = Some(Array4::ones(Shape::scalar()));
        for id in (0..=root).rev() {
            let node = &mut st.nodes[id];
            if node.leaf {
                continue;
            }
            let Some(g) = grads[id].take() else {
                node.backward = None;
                continue;
            };
            let Some(f) = node.backward.take() else {
                continue;
            };
            let needs: Vec<bool> = node.parents.iter().map(Option::is_some).collect();
            let parents = node.parents.clone();
            let input_grads = f(&g, &needs);
            debug_assert_eq!(input_grads.len(), parents.len());
            for (parent, ig) in parents.into_iter().zip(input_grads) {
                let (Some(p), Some(ig)) = (parent, ig) else {
                    continue;
                };
                match &mut grads[p] {
                    Some(acc) => acc.add_assign(&ig),
                    slot @ None => *slot = Some(ig),
                }
            }
        }
        // Drop any adjoints beyond the root as well.
        for node in st.nodes.iter_mut() {
            node.backward = None;
        }

        let mut leaf_grads = Vec::with_capacity(grads.len());
        for (id, g) in grads.into_iter().enumerate() {
            let node = &st.nodes[id];
            if node.leaf {
                leaf_grads.push(Some(g.unwrap_or_else(|| Array4::zeros(node.shape))));
            } else {
                leaf_grads.push(None);
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads: leaf_grads,
        })
    }
}

/// Leaf gradients produced by [`Tape::backward`].
pub struct Gradients<T> {
    tape: u64,
    grads: Vec<Option<Array4<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss w.r.t. a leaf; `None` for tensors that are not
    /// grad-requiring leaves of this tape.
    pub fn get(&self, t: &Tensor4<T>) -> Option<&Array4<T>> {
        match t.link {
            Some((tape, node)) if tape == self.tape => self.grads.get(node)?.as_ref(),
            _ => None,
        }
    }

    pub fn take(&mut self, t: &Tensor4<T>) -> Option<Array4<T>> {
        match t.link {
            Some((tape, node)) if tape == self.tape => self.grads.get_mut(node)?.take(),
            _ => None,
        }
    }
}
