// Copyright 2026 The Thunderbolt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "thunderbolt/dependency_graph.hpp"

#include <algorithm>
#include <sstream>

namespace thunderbolt {

std::string_view to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::kExecuting: return "Executing";
    case NodeStatus::kReadyToCommit: return "ReadyToCommit";
    case NodeStatus::kCommitted: return "Committed";
    case NodeStatus::kAborted: return "Aborted";
  }
  return "?";
}

DependencyGraph::DependencyGraph(const StateView& snapshot, DependencyGraphOptions options)
    : snapshot_(snapshot), options_(options) {}

void DependencyGraph::set_abort_listener(std::function<void(TxId)> listener) {
  std::lock_guard lock(mu_);
  abort_listener_ = std::move(listener);
}

void DependencyGraph::begin(TxPtr tx) {
  std::lock_guard lock(mu_);
  if (auto it = current_.find(tx->id); it != current_.end()) {
    auto n = nodes_.find(it->second);
    if (n != nodes_.end()) {
      throw ProtocolMisuse("begin: transaction " + to_string(tx->id) + " is already " +
                           std::string(to_string(n->second.status)));
    }
  }
  const uint64_t seq = next_seq_++;
  Node node;
  node.tx = tx;
  node.seq = seq;
  nodes_.emplace(seq, std::move(node));
  current_[tx->id] = seq;
  aborted_.erase(tx->id);
}

DependencyGraph::Node* DependencyGraph::live_node(TxId tx) {
  auto it = current_.find(tx);
  if (it == current_.end()) throw ProtocolMisuse("unknown transaction " + to_string(tx));
  auto n = nodes_.find(it->second);
  if (n == nodes_.end()) return nullptr;  // aborted and removed
  return &n->second;
}

bool DependencyGraph::is_live(uint64_t seq) const {
  auto it = nodes_.find(seq);
  return it != nodes_.end() && (it->second.status == NodeStatus::kExecuting ||
                                it->second.status == NodeStatus::kReadyToCommit);
}

bool DependencyGraph::reaches(uint64_t from, uint64_t to) const {
  if (from == to) return true;
  std::vector<uint64_t> stack{from};
  std::unordered_set<uint64_t> seen{from};
  while (!stack.empty()) {
    uint64_t cur = stack.back();
    stack.pop_back();
    for (const auto& [next, keys] : nodes_.at(cur).out) {
      if (next == to) return true;
      if (seen.insert(next).second) stack.push_back(next);
    }
  }
  return false;
}

std::set<uint64_t> DependencyGraph::reachable_from(const std::set<uint64_t>& starts) const {
  std::set<uint64_t> seen(starts.begin(), starts.end());
  std::vector<uint64_t> stack(starts.begin(), starts.end());
  while (!stack.empty()) {
    uint64_t cur = stack.back();
    stack.pop_back();
    for (const auto& [next, keys] : nodes_.at(cur).out) {
      if (seen.insert(next).second) stack.push_back(next);
    }
  }
  return seen;
}

void DependencyGraph::add_edge(uint64_t from, uint64_t to, const Key& key,
                               std::vector<UndoEdge>* undo) {
  if (nodes_.at(from).out[to].insert(key).second) {
    nodes_.at(to).in[from].insert(key);
    if (undo) undo->push_back({from, to, key});
  }
}

void DependencyGraph::remove_edge(uint64_t from, uint64_t to, const Key& key) {
  auto& out = nodes_.at(from).out;
  if (auto it = out.find(to); it != out.end()) {
    it->second.erase(key);
    if (it->second.empty()) out.erase(it);
  }
  auto& in = nodes_.at(to).in;
  if (auto it = in.find(from); it != in.end()) {
    it->second.erase(key);
    if (it->second.empty()) in.erase(it);
  }
}

Value DependencyGraph::value_at(uint64_t source, const Key& key) const {
  if (source == kRoot) {
    if (auto it = committed_values_.find(key); it != committed_values_.end()) return it->second.first;
    return snapshot_.get(key);
  }
  return *nodes_.at(source).records.at(key).last_write;
}

// The latest write node first (a writer that reaches no other live writer,
// highest seq on ties), then its ancestors among the writers, latest first,
// then the root.
std::vector<uint64_t> DependencyGraph::read_candidates(const std::set<uint64_t>& writers) const {
  std::vector<uint64_t> out;
  std::optional<uint64_t> latest;
  for (auto it = writers.rbegin(); it != writers.rend(); ++it) {
    bool sink = true;
    for (uint64_t other : writers) {
      if (other != *it && reaches(*it, other)) {
        sink = false;
        break;
      }
    }
    if (sink) {
      latest = *it;
      break;
    }
  }
  if (latest) {
    out.push_back(*latest);
    for (auto it = writers.rbegin(); it != writers.rend(); ++it) {
      if (*it != *latest && reaches(*it, *latest)) out.push_back(*it);
    }
  }
  out.push_back(kRoot);
  return out;
}

bool DependencyGraph::try_read_from(uint64_t reader, const Key& key, uint64_t source,
                                    const std::set<uint64_t>& writers,
                                    std::vector<UndoEdge>& undo) {
  if (source != kRoot) {
    if (reaches(reader, source)) return false;
    add_edge(source, reader, key, &undo);
  }
  if (!options_.enforce_read_paths) return true;
  // Every other writer must end up before the source or after the reader.
  for (uint64_t w : writers) {
    if (w == source) continue;
    if (source != kRoot && reaches(w, source)) continue;
    if (reaches(reader, w)) continue;
    if (source != kRoot && !reaches(source, w)) {
      add_edge(w, source, key, &undo);
      continue;
    }
    if (!reaches(w, reader)) {
      add_edge(reader, w, key, &undo);
      continue;
    }
    return false;
  }
  return true;
}

std::optional<Value> DependencyGraph::read(TxId tx, const Key& key) {
  std::lock_guard lock(mu_);
  Node* node = live_node(tx);
  if (node == nullptr) return std::nullopt;
  if (node->status != NodeStatus::kExecuting) {
    throw ProtocolMisuse("read after finalize by " + to_string(tx));
  }
  if (auto rec = node->records.find(key); rec != node->records.end()) {
    return rec->second.last_write ? *rec->second.last_write : *rec->second.first_read;
  }
  const uint64_t self = node->seq;
  const std::set<uint64_t> writers = writers_[key];
  for (uint64_t source : read_candidates(writers)) {
    std::vector<UndoEdge> undo;
    if (try_read_from(self, key, source, writers, undo)) {
      KeyRecord rec;
      rec.first_read = value_at(source, key);
      rec.read_source = source;
      if (source == kRoot) {
        if (auto it = committed_values_.find(key); it != committed_values_.end()) {
          rec.source_tx = it->second.second;
        }
      } else {
        rec.source_tx = nodes_.at(source).tx->id;
        served_[source][key].insert(self);
      }
      Value v = *rec.first_read;
      nodes_.at(self).records.emplace(key, rec);
      readers_[key].insert(self);
      return v;
    }
    for (auto it = undo.rbegin(); it != undo.rend(); ++it) remove_edge(it->from, it->to, it->key);
  }
  // No source keeps the graph acyclic: the reader is the conflicted node.
  abort_conflicted(self, key);
  return std::nullopt;
}

bool DependencyGraph::write(TxId tx, const Key& key, Value value) {
  std::lock_guard lock(mu_);
  Node* node = live_node(tx);
  if (node == nullptr) return false;
  if (node->status != NodeStatus::kExecuting) {
    throw ProtocolMisuse("write after finalize by " + to_string(tx));
  }
  const uint64_t self = node->seq;
  KeyRecord& rec = node->records[key];
  if (rec.last_write) {
    if (*rec.last_write == value) return true;
    rec.last_write = value;
    // Everyone who read the old value is now stale.
    std::set<uint64_t> stale;
    if (auto s = served_.find(self); s != served_.end()) {
      if (auto k = s->second.find(key); k != s->second.end()) stale = k->second;
    }
    if (!stale.empty()) abort_set(reachable_from(stale));
    return true;
  }
  rec.last_write = value;
  writers_[key].insert(self);

  // A first write must not slip between an existing reader and its source.
  const std::set<uint64_t> readers = readers_[key];
  for (uint64_t r : readers) {
    if (r == self || !is_live(r)) continue;
    const uint64_t source = nodes_.at(r).records.at(key).read_source;
    const bool source_live = source != kRoot && is_live(source);
    if (source_live && reaches(self, source)) continue;
    if (reaches(r, self)) continue;
    if (!reaches(self, r)) {
      add_edge(r, self, key, nullptr);
      continue;
    }
    if (source_live && !reaches(source, self)) {
      add_edge(self, source, key, nullptr);
      continue;
    }
    abort_conflicted(r, key);
  }
  return true;
}

void DependencyGraph::abort_conflicted(uint64_t seq, const Key& key) {
  const Node& node = nodes_.at(seq);
  std::set<uint64_t> victims{seq};
  auto rec = node.records.find(key);
  if (rec != node.records.end() && rec->second.last_write) {
    // Writer on the contested key: cascade along every outgoing edge.
    victims = reachable_from(victims);
  } else if (auto s = served_.find(seq); s != served_.end()) {
    // Reader on the contested key: only transactions that consumed one of
    // its writes go with it.
    std::set<uint64_t> consumers;
    for (const auto& [k, readers] : s->second) consumers.insert(readers.begin(), readers.end());
    if (!consumers.empty()) {
      for (uint64_t v : reachable_from(consumers)) victims.insert(v);
    }
  }
  abort_set(std::move(victims));
}

void DependencyGraph::abort_set(std::set<uint64_t> victims) {
  // Preserve orderings among the survivors that ran through removed nodes.
  for (uint64_t v : victims) {
    for (const auto& [pred, pkeys] : nodes_.at(v).in) {
      if (victims.count(pred) || !is_live(pred)) continue;
      std::vector<uint64_t> stack{v};
      std::unordered_set<uint64_t> seen{v};
      while (!stack.empty()) {
        uint64_t cur = stack.back();
        stack.pop_back();
        for (const auto& [next, keys] : nodes_.at(cur).out) {
          if (!seen.insert(next).second) continue;
          if (victims.count(next)) {
            stack.push_back(next);
          } else if (is_live(next)) {
            for (const auto& k : keys) add_edge(pred, next, k, nullptr);
          }
        }
      }
    }
  }

  std::vector<TxId> logged;
  for (uint64_t v : victims) {
    Node& node = nodes_.at(v);
    logged.push_back(node.tx->id);
    std::vector<UndoEdge> drop;
    for (const auto& [to, keys] : node.out)
      for (const auto& k : keys) drop.push_back({v, to, k});
    for (const auto& [from, keys] : node.in)
      for (const auto& k : keys) drop.push_back({from, v, k});
    for (const auto& e : drop) remove_edge(e.from, e.to, e.key);
    for (const auto& [k, rec] : node.records) {
      if (rec.last_write) writers_[k].erase(v);
      if (rec.first_read) {
        readers_[k].erase(v);
        if (rec.read_source != kRoot) {
          if (auto s = served_.find(rec.read_source); s != served_.end()) {
            if (auto sk = s->second.find(k); sk != s->second.end()) sk->second.erase(v);
          }
        }
      }
    }
    served_.erase(v);
    const bool was_waiting = node.status == NodeStatus::kReadyToCommit;
    ready_.erase(v);
    aborted_.insert(node.tx->id);
    if (was_waiting) {
      aborted_waiting_.push_back(node.tx->id);
      if (abort_listener_) abort_listener_(node.tx->id);
    }
  }
  for (uint64_t v : victims) nodes_.erase(v);
  abort_count_ += victims.size();
  abort_log_.push_back(std::move(logged));
  try_commit();
}

FinalizeOutcome DependencyGraph::finalize(TxId tx, Value result) {
  std::lock_guard lock(mu_);
  Node* node = live_node(tx);
  if (node == nullptr) return {FinalizeOutcome::Kind::kAborted, 0};
  if (node->status != NodeStatus::kExecuting) {
    throw ProtocolMisuse("finalize twice by " + to_string(tx));
  }
  node->result = result;
  node->status = NodeStatus::kReadyToCommit;
  const uint64_t seq = node->seq;
  ready_.insert(seq);
  try_commit();
  const Node& after = nodes_.at(seq);
  if (after.status == NodeStatus::kCommitted) {
    return {FinalizeOutcome::Kind::kCommitted, after.order_index};
  }
  return {FinalizeOutcome::Kind::kPending, 0};
}

void DependencyGraph::try_commit() {
  bool progress = true;
  while (progress) {
    progress = false;
    for (auto it = ready_.begin(); it != ready_.end(); ++it) {
      Node& node = nodes_.at(*it);
      bool blocked = false;
      for (const auto& [pred, keys] : node.in) {
        if (nodes_.at(pred).status != NodeStatus::kCommitted) {
          blocked = true;
          break;
        }
      }
      if (blocked) continue;
      node.status = NodeStatus::kCommitted;
      node.order_index = committed_order_.size();
      committed_order_.push_back(node.seq);
      for (const auto& [k, rec] : node.records) {
        if (rec.last_write) {
          committed_values_[k] = {*rec.last_write, node.tx->id};
          writers_[k].erase(node.seq);
        }
        if (rec.first_read) readers_[k].erase(node.seq);
      }
      served_.erase(node.seq);
      ready_.erase(it);
      progress = true;
      break;
    }
  }
}

std::vector<TxId> DependencyGraph::take_aborted_waiting() {
  std::lock_guard lock(mu_);
  std::vector<TxId> out;
  out.swap(aborted_waiting_);
  return out;
}

PreplayResult DependencyGraph::extract_schedule() const {
  std::lock_guard lock(mu_);
  for (const auto& [seq, node] : nodes_) {
    if (node.status != NodeStatus::kCommitted) {
      throw ProtocolMisuse("extract_schedule with live transaction " + to_string(node.tx->id));
    }
  }
  PreplayResult out;
  out.reexecutions = abort_count_;
  for (uint64_t seq : committed_order_) {
    const Node& node = nodes_.at(seq);
    TxEffects fx;
    fx.tx = node.tx;
    fx.result = node.result;
    for (const auto& [k, rec] : node.records) {
      if (rec.first_read) fx.reads.push_back({k, *rec.first_read, rec.source_tx});
      if (rec.last_write) fx.writes[k] = *rec.last_write;
    }
    out.schedule.push_back(std::move(fx));
  }
  return out;
}

NodeStatus DependencyGraph::status(TxId tx) const {
  std::lock_guard lock(mu_);
  auto it = current_.find(tx);
  if (it == current_.end()) throw ProtocolMisuse("unknown transaction " + to_string(tx));
  auto n = nodes_.find(it->second);
  return n == nodes_.end() ? NodeStatus::kAborted : n->second.status;
}

std::vector<TxId> DependencyGraph::committed_order() const {
  std::lock_guard lock(mu_);
  std::vector<TxId> out;
  for (uint64_t seq : committed_order_) out.push_back(nodes_.at(seq).tx->id);
  return out;
}

std::vector<GraphEdge> DependencyGraph::edges() const {
  std::lock_guard lock(mu_);
  std::vector<GraphEdge> out;
  for (const auto& [seq, node] : nodes_) {
    for (const auto& [to, keys] : node.out) {
      for (const auto& k : keys) out.push_back({node.tx->id, nodes_.at(to).tx->id, k});
    }
    for (const auto& [k, rec] : node.records) {
      bool has_incoming = false;
      for (const auto& [from, keys] : node.in) has_incoming |= keys.count(k) > 0;
      if (!has_incoming) out.push_back({std::nullopt, node.tx->id, k});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string DependencyGraph::dump_edges(const std::function<std::string(TxId)>& name) const {
  auto label = [&](TxId id) { return name ? name(id) : to_string(id); };
  std::vector<std::string> lines;
  for (const auto& e : edges()) {
    lines.push_back("(" + (e.from ? label(*e.from) : std::string("R")) + ", " + label(e.to) + ", " +
                    e.key + ")");
  }
  std::sort(lines.begin(), lines.end());
  std::ostringstream os;
  for (const auto& l : lines) os << l << "\n";
  return os.str();
}

std::vector<std::vector<TxId>> DependencyGraph::abort_log() const {
  std::lock_guard lock(mu_);
  return abort_log_;
}

uint64_t DependencyGraph::abort_count() const {
  std::lock_guard lock(mu_);
  return abort_count_;
}

size_t DependencyGraph::live_count() const {
  std::lock_guard lock(mu_);
  size_t n = 0;
  for (const auto& [seq, node] : nodes_) n += node.status != NodeStatus::kCommitted;
  return n;
}

size_t DependencyGraph::committed_count() const {
  std::lock_guard lock(mu_);
  return committed_order_.size();
}

}  // namespace thunderbolt
