//! Topic-based fan-out with per-topic FIFO delivery.
//!
//! Delivery happens synchronously inside [`Broker::publish`] under the broker
//! lock, so every subscriber sees the messages of one topic in publication
//! order. Sinks must not block; a sink returning `false` is dropped.

use std::collections::{BTreeMap, HashMap};
use std::sync::mpsc;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::domain::WallMs;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopicFilter {
    All,
    Exact(String),
    Prefix(String),
}

impl TopicFilter {
    pub fn matches(&self, topic: &str) -> bool {
        match self {
            TopicFilter::All => true,
            TopicFilter::Exact(t) => t == topic,
            TopicFilter::Prefix(p) => topic.starts_with(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Publication<T> {
    pub topic: String,
    /// 1-based position within the topic.
    pub topic_seq: u64,
    pub published_at: WallMs,
    pub data: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubscriptionId(u64);

type Sink<T> = Box<dyn FnMut(&Arc<Publication<T>>) -> bool + Send>;

struct Subscriber<T> {
    filter: TopicFilter,
    sink: Sink<T>,
}

struct Inner<T> {
    next_id: u64,
    subscribers: BTreeMap<SubscriptionId, Subscriber<T>>,
    topic_seq: HashMap<String, u64>,
}

pub struct Broker<T> {
    inner: Mutex<Inner<T>>,
}

impl<T> Default for Broker<T> {
    fn default() -> Self {
        Self {
            inner: Mutex::new(Inner {
                next_id: 0,
                subscribers: BTreeMap::new(),
                topic_seq: HashMap::new(),
            }),
        }
    }
}

impl<T> std::fmt::Debug for Broker<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Broker").field("subscribers", &self.inner.lock().subscribers.len()).finish()
    }
}

impl<T: Send + Sync + 'static> Broker<T> {
    pub fn subscribe(
        &self,
        filter: TopicFilter,
        sink: impl FnMut(&Arc<Publication<T>>) -> bool + Send + 'static,
    ) -> SubscriptionId {
        let mut inner = self.inner.lock();
        let id = SubscriptionId(inner.next_id);
        inner.next_id += 1;
        inner.subscribers.insert(
            id,
            Subscriber {
                filter,
                sink: Box::new(sink),
            },
        );
        id
    }

    /// Subscription backed by an unbounded channel. Dropping the receiver
    /// ends the subscription on the next publication.
    pub fn subscribe_channel(
        &self,
        filter: TopicFilter,
    ) -> (SubscriptionId, mpsc::Receiver<Arc<Publication<T>>>) {
        let (tx, rx) = mpsc::channel();
        let id = self.subscribe(filter, move |p| tx.send(Arc::clone(p)).is_ok());
        (id, rx)
    }

    pub fn unsubscribe(&self, id: SubscriptionId) -> bool {
        self.inner.lock().subscribers.remove(&id).is_some()
    }

    pub fn subscriber_count(&self) -> usize {
        self.inner.lock().subscribers.len()
    }

    /// Publishes and returns the number of deliveries.
    pub fn publish(&self, topic: &str, published_at: WallMs, data: T) -> usize {
        let mut inner = self.inner.lock();
        let seq = inner.topic_seq.entry(topic.to_owned()).or_insert(0);
        *seq += 1;
        let publication = Arc::new(Publication {
            topic: topic.to_owned(),
            topic_seq: *seq,
            published_at,
            data,
        });
        let mut delivered = 0;
        inner.subscribers.retain(|_, sub| {
            if !sub.filter.matches(topic) {
                return true;
            }
            let alive = (sub.sink)(&publication);
            if alive {
                delivered += 1;
            }
            alive
        });
        delivered
    }
}
