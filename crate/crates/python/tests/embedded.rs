use pyo3::prelude::*;
use pyo3::ffi::c_str;

fn with_module(code: &std::ffi::CStr) {
    evtcn_py::register_embedded();
    Python::initialize();
    Python::attach(|py| {
        if let Err(e) = py.run(code, None, None) {
            e.print(py);
            panic!("python snippet failed: {e}");
        }
    });
}

#[test]
fn bindings_work_end_to_end() {
    with_module(c_str!(
        r#"
import evtcn, tempfile, os

assert evtcn.pearson_rho([1.0, 2.0, 3.0], [2.0, 4.0, 6.5]) > 0.99
assert evtcn.pearson_rho([1.0, 1.0], [0.0, 1.0]) is None
assert evtcn.m_rho([[1.0, None], [0.5, 0.5]]) == (0.5, 1)
assert evtcn.ensemble([[1.0]], [[0.0]]) == [[0.8]]
assert evtcn.receptive_field(3, [1, 2, 4]) == 29
pe = evtcn.positional_encode(0, dim=4)
assert pe == [0.0, 1.0, 0.0, 1.0]

seqs = evtcn.synthetic_dataset(seed=3, videos=3, min_len=20, max_len=30, features=4, expressions=2, gap_prob=0.2)
assert len(seqs) == 3 and seqs[0].feature_dim == 4
s = seqs[0].with_positional(dim=8)
assert s.feature_dim == 12

m = evtcn.Model(4, 2, hidden=6, blocks=2, head_hidden=5, dropout=0.0, seed=1)
assert m.input_dim == 20 and m.output_dim == 2 and m.precision == "standard"
losses = m.train(seqs, epochs=3, lr=0.05, batch_size=1)
assert len(losses) == 3 and losses[-1] < losses[0], losses
rho, undefined = evtcn.evaluate(m, seqs)
assert -1.0 <= rho <= 1.0

d = tempfile.mkdtemp()
path = os.path.join(d, "m.tcnk")
m.save(path)
back = evtcn.Model.load(path)
clean = seqs[1].drop_unannotated()
assert back.predict_sequence(clean) == m.predict_sequence(clean)
assert back.num_parameters == m.num_parameters

fpath = os.path.join(d, "clip.fseq")
seqs[1].save(fpath)
loaded = evtcn.Sequence.load(fpath)
assert loaded.video_id == "clip" and loaded.features == seqs[1].features and loaded.mask == seqs[1].mask

with open(path, "wb") as f:
    f.write(b"TCNK")
try:
    evtcn.Model.load(path)
    raise AssertionError("expected FormatError")
except evtcn.FormatError as e:
    assert isinstance(e, evtcn.EvtcnError)

try:
    evtcn.Model(3, 1, dropout=1.5)
    raise AssertionError("expected ConfigError")
except evtcn.ConfigError:
    pass

try:
    evtcn.Sequence("v", [2, 1], [[0.0], [1.0]])
    raise AssertionError("expected EvtcnError")
except evtcn.EvtcnError:
    pass
"#
    ));
}
