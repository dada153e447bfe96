//! Linear memory as a chain of copy-on-write byte maps.
//!
//! A [`Memory`] is a view onto a stack of layers. Each layer records only
//! the bytes written while it was the tip; reads fall through to the
//! parent and finally to zero. Cloning a memory shares the tip, which
//! freezes it: the next write through either clone opens a fresh layer on
//! top, so forking costs O(1) regardless of memory size and the layer that
//! was shared is never mutated again.

use std::collections::HashMap;
use std::sync::Arc;

pub const PAGE_SIZE: u64 = 65536;
/// 4 GiB of 32-bit address space.
pub const MAX_PAGES: u64 = 65536;

pub struct Layer<B> {
    parent: Option<Arc<Layer<B>>>,
    writes: HashMap<u32, B>,
    depth: usize,
}

impl<B> Drop for Layer<B> {
    fn drop(&mut self) {
        // Unlink iteratively; long fork chains would overflow the stack.
        let mut next = self.parent.take();
        while let Some(layer) = next {
            match Arc::try_unwrap(layer) {
                Ok(mut owned) => next = owned.parent.take(),
                Err(_) => break,
            }
        }
    }
}

pub struct Memory<B> {
    tip: Arc<Layer<B>>,
    size: u64,
    max_pages: Option<u32>,
    zero: B,
}

impl<B: Clone> Clone for Memory<B> {
    /// Shares (and thereby freezes) the current tip.
    fn clone(&self) -> Self {
        Memory { tip: Arc::clone(&self.tip), size: self.size, max_pages: self.max_pages, zero: self.zero.clone() }
    }
}

impl<B: Clone + std::fmt::Debug> std::fmt::Debug for Memory<B> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Memory")
            .field("pages", &self.pages())
            .field("max_pages", &self.max_pages)
            .field("depth", &self.depth())
            .finish()
    }
}

impl<B: Clone> Memory<B> {
    /// A zero-filled memory of `min_pages` pages.
    pub fn new(min_pages: u32, max_pages: Option<u32>, zero: B) -> Memory<B> {
        debug_assert!(max_pages.map_or(true, |m| min_pages <= m));
        Memory {
            tip: Arc::new(Layer { parent: None, writes: HashMap::new(), depth: 0 }),
            size: min_pages as u64 * PAGE_SIZE,
            max_pages,
            zero,
        }
    }

    /// Split into two independent children of the (now frozen) current view.
    pub fn fork(self) -> (Memory<B>, Memory<B>) {
        let other = self.clone();
        (self, other)
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn pages(&self) -> u32 {
        (self.size / PAGE_SIZE) as u32
    }

    pub fn max_pages(&self) -> Option<u32> {
        self.max_pages
    }

    /// True when the tip is shared with another view and cannot be
    /// written in place.
    pub fn is_frozen(&self) -> bool {
        Arc::strong_count(&self.tip) > 1
    }

    /// Number of layers below the tip.
    pub fn depth(&self) -> usize {
        self.tip.depth
    }

    pub fn read(&self, addr: u32) -> B {
        debug_assert!((addr as u64) < self.size, "read past end of memory");
        let mut layer = Some(&self.tip);
        while let Some(l) = layer {
            if let Some(b) = l.writes.get(&addr) {
                return b.clone();
            }
            layer = l.parent.as_ref();
        }
        self.zero.clone()
    }

    pub fn write(&mut self, addr: u32, byte: B) {
        debug_assert!((addr as u64) < self.size, "write past end of memory");
        self.own_tip().writes.insert(addr, byte);
    }

    pub fn read_bytes(&self, addr: u32, n: u32) -> Vec<B> {
        (0..n).map(|i| self.read(addr + i)).collect()
    }

    pub fn write_bytes(&mut self, addr: u32, bytes: &[B]) {
        let tip = self.own_tip();
        for (i, b) in bytes.iter().enumerate() {
            tip.writes.insert(addr + i as u32, b.clone());
        }
    }

    fn own_tip(&mut self) -> &mut Layer<B> {
        if Arc::get_mut(&mut self.tip).is_none() {
            let parent = Arc::clone(&self.tip);
            let depth = parent.depth + 1;
            self.tip = Arc::new(Layer { parent: Some(parent), writes: HashMap::new(), depth });
        }
        Arc::get_mut(&mut self.tip).expect("fresh layer is unshared")
    }

    /// Grow by `delta` pages; the previous size in pages, or `None` when the
    /// limit would be exceeded.
    pub fn grow(&mut self, delta: u32) -> Option<u32> {
        let old = self.pages();
        let new = old as u64 + delta as u64;
        let limit = self.max_pages.map_or(MAX_PAGES, |m| m as u64);
        if new > limit {
            return None;
        }
        self.size = new * PAGE_SIZE;
        Some(old)
    }

    /// Identities and entry counts of every layer this view can reach,
    /// for allocation accounting.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut layer = Some(&self.tip);
        while let Some(l) = layer {
            out.push((Arc::as_ptr(l) as usize, l.writes.len()));
            layer = l.parent.as_ref();
        }
        out
    }

    /// Collapse the chain into a single private layer. Lookups are
    /// unchanged; sharing with other views is given up.
    pub fn flatten(&mut self) {
        let mut merged: HashMap<u32, B> = HashMap::new();
        let mut layer = Some(&self.tip);
        while let Some(l) = layer {
            for (k, v) in &l.writes {
                merged.entry(*k).or_insert_with(|| v.clone());
            }
            layer = l.parent.as_ref();
        }
        self.tip = Arc::new(Layer { parent: None, writes: merged, depth: 0 });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_memory_is_zeroed() {
        let m: Memory<u8> = Memory::new(1, None, 0);
        assert_eq!(m.size(), 65536);
        assert_eq!(m.read(0), 0);
        assert_eq!(m.read(65535), 0);
        let empty: Memory<u8> = Memory::new(0, None, 0);
        assert_eq!(empty.size(), 0);
    }

    #[test]
    fn children_are_isolated() {
        let mut m: Memory<u8> = Memory::new(1, None, 0);
        m.write(10, 7);
        let (mut a, b) = m.fork();
        assert!(a.is_frozen() && b.is_frozen());
        a.write(10, 9);
        a.write(11, 1);
        assert_eq!(a.read(10), 9);
        assert_eq!(b.read(10), 7);
        assert_eq!(b.read(11), 0);
        assert!(!a.is_frozen());
        assert_eq!(a.depth(), 1);
        assert_eq!(b.depth(), 0);
    }

    #[test]
    fn grow_respects_maximum() {
        let mut m: Memory<u8> = Memory::new(1, Some(2), 0);
        assert_eq!(m.grow(1), Some(1));
        assert_eq!(m.pages(), 2);
        assert_eq!(m.grow(1), None);
        assert_eq!(m.pages(), 2);
        assert_eq!(m.grow(0), Some(2));
    }

    #[test]
    fn long_chains_drop_without_recursion() {
        let mut m: Memory<u8> = Memory::new(1, None, 0);
        let mut keep = Vec::new();
        for i in 0..200_000u32 {
            let child = m.clone();
            keep.push(m);
            m = child;
            m.write(i % 65536, (i % 251) as u8);
            if keep.len() > 1 {
                keep.remove(0);
            }
        }
        assert_eq!(m.depth(), 200_000);
        drop(keep);
        drop(m);
    }

    #[test]
    fn flatten_preserves_lookups() {
        let mut m: Memory<u8> = Memory::new(1, None, 0);
        for i in 0..50u32 {
            let (mut a, _b) = m.fork();
            a.write(i, i as u8 + 1);
            a.write(0, i as u8);
            m = a;
        }
        let before: Vec<u8> = (0..64).map(|i| m.read(i)).collect();
        m.flatten();
        assert_eq!(m.depth(), 0);
        let after: Vec<u8> = (0..64).map(|i| m.read(i)).collect();
        assert_eq!(before, after);
    }
}
