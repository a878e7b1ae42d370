#include "pfedpm/autodiff.hpp"

#include <cmath>
#include <utility>

namespace pfedpm {

namespace {
Tensor scalar(double x) {
  Tensor t(1, 1);
  t.at(0, 0) = x;
  return t;
}
}  // namespace

int Tape::check(NodeId id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw ContractError("tape: invalid node id " + std::to_string(id));
  return id;
}

void Tape::require_open(const char* op) const {
  if (finalized_) throw ContractError(std::string(op) + ": tape already ran backward");
}

Tape::NodeId Tape::leaf(const Tensor& t, bool needs_grad) {
  require_open("leaf");
  return push(t, needs_grad, nullptr);
}

Tape::NodeId Tape::push(Tensor val, bool needs_grad, std::function<void(Tape&)> back) {
  Node n;
  n.adj = Tensor(val.rows(), val.cols());
  n.val = std::move(val);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Tensor& Tape::grad(NodeId id) const {
  if (!finalized_) throw ContractError("grad: backward has not run");
  return nodes_[check(id)].adj;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  require_open("matmul");
  check(a);
  check(b);
  Tensor out = pfedpm::matmul(nodes_[a].val, nodes_[b].val);
  NodeId id = push(std::move(out), nodes_[a].needs_grad || nodes_[b].needs_grad,
                   [a, b](Tape& t) {
                     const Tensor& g = t.adj(t.last_);
                     const Tensor& av = t.nodes_[a].val;
                     const Tensor& bv = t.nodes_[b].val;
                     if (t.nodes_[a].needs_grad) {
                       Tensor& ga = t.adj(a);
                       for (int i = 0; i < av.rows(); ++i)
                         for (int k = 0; k < av.cols(); ++k) {
                           double s = 0.0;
                           for (int j = 0; j < bv.cols(); ++j) s += g.at(i, j) * bv.at(k, j);
                           ga.at(i, k) += s;
                         }
                     }
                     if (t.nodes_[b].needs_grad) {
                       Tensor& gb = t.adj(b);
                       for (int k = 0; k < bv.rows(); ++k)
                         for (int j = 0; j < bv.cols(); ++j) {
                           double s = 0.0;
                           for (int i = 0; i < av.rows(); ++i) s += av.at(i, k) * g.at(i, j);
                           gb.at(k, j) += s;
                         }
                     }
                   });
  return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  require_open("add");
  Tensor out = pfedpm::add(nodes_[check(a)].val, nodes_[check(b)].val);
  return push(std::move(out), nodes_[a].needs_grad || nodes_[b].needs_grad, [a, b](Tape& t) {
    const Tensor& g = t.adj(t.last_);
    if (t.nodes_[a].needs_grad)
      for (std::size_t i = 0; i < g.size(); ++i) t.adj(a).raw()[i] += g.raw()[i];
    if (t.nodes_[b].needs_grad)
      for (std::size_t i = 0; i < g.size(); ++i) t.adj(b).raw()[i] += g.raw()[i];
  });
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  require_open("scale");
  Tensor out = nodes_[check(a)].val;
  for (double& v : out.raw()) v *= c;
  check_finite(out, "scale");
  return push(std::move(out), nodes_[a].needs_grad, [a, c](Tape& t) {
    if (!t.nodes_[a].needs_grad) return;
    const Tensor& g = t.adj(t.last_);
    for (std::size_t i = 0; i < g.size(); ++i) t.adj(a).raw()[i] += c * g.raw()[i];
  });
}

Tape::NodeId Tape::add_bias(NodeId x, NodeId b) {
  require_open("add_bias");
  Tensor out = pfedpm::add_bias(nodes_[check(x)].val, nodes_[check(b)].val);
  return push(std::move(out), nodes_[x].needs_grad || nodes_[b].needs_grad, [x, b](Tape& t) {
    const Tensor& g = t.adj(t.last_);
    if (t.nodes_[x].needs_grad)
      for (std::size_t i = 0; i < g.size(); ++i) t.adj(x).raw()[i] += g.raw()[i];
    if (t.nodes_[b].needs_grad) {
      Tensor& gb = t.adj(b);
      for (int j = 0; j < g.cols(); ++j) {
        double s = 0.0;
        for (int i = 0; i < g.rows(); ++i) s += g.at(i, j);
        gb.at(0, j) += s;
      }
    }
  });
}

Tape::NodeId Tape::relu(NodeId x) {
  require_open("relu");
  Tensor out = pfedpm::relu(nodes_[check(x)].val);
  return push(std::move(out), nodes_[x].needs_grad, [x](Tape& t) {
    if (!t.nodes_[x].needs_grad) return;
    const Tensor& g = t.adj(t.last_);
    const Tensor& xv = t.nodes_[x].val;
    // subgradient at 0 is 0
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv.raw()[i] > 0.0) t.adj(x).raw()[i] += g.raw()[i];
  });
}

Tape::NodeId Tape::sigmoid(NodeId x) {
  require_open("sigmoid");
  Tensor out = pfedpm::sigmoid(nodes_[check(x)].val);
  return push(std::move(out), nodes_[x].needs_grad, [x](Tape& t) {
    if (!t.nodes_[x].needs_grad) return;
    const Tensor& g = t.adj(t.last_);
    const Tensor& s = t.nodes_[t.last_].val;
    for (std::size_t i = 0; i < g.size(); ++i)
      t.adj(x).raw()[i] += g.raw()[i] * s.raw()[i] * (1.0 - s.raw()[i]);
  });
}

Tape::NodeId Tape::concat_rows(NodeId a, NodeId b) {
  require_open("concat_rows");
  Tensor out = pfedpm::concat_rows(nodes_[check(a)].val, nodes_[check(b)].val);
  int p = nodes_[a].val.cols();
  return push(std::move(out), nodes_[a].needs_grad || nodes_[b].needs_grad, [a, b, p](Tape& t) {
    const Tensor& g = t.adj(t.last_);
    if (t.nodes_[a].needs_grad) {
      Tensor& ga = t.adj(a);
      for (int i = 0; i < ga.rows(); ++i)
        for (int j = 0; j < p; ++j) ga.at(i, j) += g.at(i, j);
    }
    if (t.nodes_[b].needs_grad) {
      Tensor& gb = t.adj(b);
      for (int i = 0; i < gb.rows(); ++i)
        for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += g.at(i, p + j);
    }
  });
}

Tape::NodeId Tape::mean_rows(NodeId x) {
  require_open("mean_rows");
  Tensor out = pfedpm::mean_rows(nodes_[check(x)].val);
  int m = nodes_[x].val.rows();
  return push(std::move(out), nodes_[x].needs_grad, [x, m](Tape& t) {
    if (!t.nodes_[x].needs_grad) return;
    const Tensor& g = t.adj(t.last_);
    Tensor& gx = t.adj(x);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < g.cols(); ++j) gx.at(i, j) += g.at(0, j) / m;
  });
}

Tape::NodeId Tape::gather_rows(NodeId x, std::vector<int> idx) {
  require_open("gather_rows");
  Tensor out = pfedpm::gather_rows(nodes_[check(x)].val, idx);
  return push(std::move(out), nodes_[x].needs_grad, [x, idx = std::move(idx)](Tape& t) {
    if (!t.nodes_[x].needs_grad) return;
    const Tensor& g = t.adj(t.last_);
    Tensor& gx = t.adj(x);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < g.cols(); ++j) gx.at(idx[i], j) += g.at(static_cast<int>(i), j);
  });
}

Tape::NodeId Tape::softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
  require_open("softmax_cross_entropy");
  double loss = pfedpm::softmax_cross_entropy(nodes_[check(logits)].val, labels);
  Tensor probs = softmax_rows(nodes_[logits].val);
  int m = nodes_[logits].val.rows();
  return push(scalar(loss), nodes_[logits].needs_grad,
              [logits, labels = std::move(labels), probs = std::move(probs), m](Tape& t) {
                if (!t.nodes_[logits].needs_grad) return;
                double g = t.adj(t.last_).at(0, 0);
                Tensor& gl = t.adj(logits);
                for (int i = 0; i < m; ++i)
                  for (int j = 0; j < probs.cols(); ++j) {
                    double p = probs.at(i, j) - (labels[i] == j ? 1.0 : 0.0);
                    gl.at(i, j) += g * p / m;
                  }
              });
}

Tape::NodeId Tape::mse(NodeId pred, NodeId target) {
  require_open("mse");
  double loss = pfedpm::mse(nodes_[check(pred)].val, nodes_[check(target)].val);
  return push(scalar(loss), nodes_[pred].needs_grad || nodes_[target].needs_grad,
              [pred, target](Tape& t) {
                double g = t.adj(t.last_).at(0, 0);
                const Tensor& p = t.nodes_[pred].val;
                const Tensor& q = t.nodes_[target].val;
                double n = static_cast<double>(p.size());
                if (t.nodes_[pred].needs_grad)
                  for (std::size_t i = 0; i < p.size(); ++i)
                    t.adj(pred).raw()[i] += g * 2.0 * (p.raw()[i] - q.raw()[i]) / n;
                if (t.nodes_[target].needs_grad)
                  for (std::size_t i = 0; i < p.size(); ++i)
                    t.adj(target).raw()[i] -= g * 2.0 * (p.raw()[i] - q.raw()[i]) / n;
              });
}

Tape::NodeId Tape::l2_distance(NodeId u, NodeId v) {
  require_open("l2_distance");
  double dist = pfedpm::l2_distance(nodes_[check(u)].val, nodes_[check(v)].val);
  return push(scalar(dist), nodes_[u].needs_grad || nodes_[v].needs_grad,
              [u, v, dist](Tape& t) {
                if (dist == 0.0) return;  // subgradient 0 at coincidence
                double g = t.adj(t.last_).at(0, 0);
                const Tensor& uv = t.nodes_[u].val;
                const Tensor& vv = t.nodes_[v].val;
                for (std::size_t i = 0; i < uv.size(); ++i) {
                  double d = g * (uv.raw()[i] - vv.raw()[i]) / dist;
                  if (t.nodes_[u].needs_grad) t.adj(u).raw()[i] += d;
                  if (t.nodes_[v].needs_grad) t.adj(v).raw()[i] -= d;
                }
              });
}

Tape::NodeId Tape::sum(NodeId x) {
  require_open("sum");
  double s = pfedpm::sum(nodes_[check(x)].val);
  return push(scalar(s), nodes_[x].needs_grad, [x](Tape& t) {
    if (!t.nodes_[x].needs_grad) return;
    double g = t.adj(t.last_).at(0, 0);
    for (double& v : t.adj(x).raw()) v += g;
  });
}

void Tape::backward(NodeId root) {
  require_open("backward");
  check(root);
  if (nodes_[root].val.rows() != 1 || nodes_[root].val.cols() != 1)
    throw ContractError("backward: root must be scalar, got " + nodes_[root].val.shape_str());
  finalized_ = true;
  nodes_[root].adj.at(0, 0) = 1.0;
  for (int id = root; id >= 0; --id) {
    if (!nodes_[id].back || !nodes_[id].needs_grad) continue;
    last_ = id;
    nodes_[id].back(*this);
  }
}

}  // namespace pfedpm
