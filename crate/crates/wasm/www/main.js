import init, { simulate, simulate_synthetic, relation, builtin_scenarios } from "./pkg/commitguard_wasm.js";

const $ = (id) => document.getElementById(id);
const COLORS = { Reader: "#4a90d9", Writer: "#d9534f" };
const LANE = 18;
const LABEL_W = 150;

function draw(t) {
  const canvas = $("gantt");
  const accounts = [...new Set(t.bars.map((b) => b.account))];
  // One row per commitment, grouped by account.
  const rows = [];
  for (const acct of accounts) {
    rows.push({ header: acct });
    for (const b of t.bars.filter((b) => b.account === acct)) rows.push({ bar: b });
  }
  canvas.height = Math.max(60, rows.length * LANE + 30);
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const span = Math.max(1, t.horizon);
  const x = (tick) => LABEL_W + (tick / span) * (canvas.width - LABEL_W - 10);

  ctx.font = "11px monospace";
  ctx.strokeStyle = "#eee";
  const step = Math.max(1, Math.ceil(span / 20));
  for (let k = 0; k <= span; k += step) {
    ctx.beginPath();
    ctx.moveTo(x(k), 0);
    ctx.lineTo(x(k), canvas.height - 16);
    ctx.stroke();
    ctx.fillStyle = "#888";
    ctx.fillText(String(k), x(k) - 3, canvas.height - 4);
  }

  rows.forEach((row, i) => {
    const y = i * LANE + 4;
    if (row.header) {
      ctx.fillStyle = "#000";
      ctx.fillText(row.header, 2, y + 12);
      return;
    }
    const b = row.bar;
    ctx.fillStyle = "#555";
    ctx.fillText(`#${b.cid} ${b.responsibility}`, 12, y + 12);
    if (b.start !== null && b.start > b.created) {
      ctx.fillStyle = "#ccc";
      ctx.fillRect(x(b.created), y + 3, x(b.start) - x(b.created), LANE - 8);
    }
    if (b.start !== null) {
      const end = b.end ?? t.horizon;
      ctx.fillStyle = b.failed ? "#333" : COLORS[b.access];
      ctx.fillRect(x(b.start), y, Math.max(2, x(end) - x(b.start)), LANE - 2);
    }
  });
}

function show(json) {
  const t = JSON.parse(json);
  draw(t);
  $("narrative").textContent = t.narrative;
  const m = { ...t.metrics };
  delete m.queue_length_series;
  $("metrics").textContent = JSON.stringify(m, null, 2);
  $("summary").textContent =
    `${t.metrics.commitments} commitments, ${t.metrics.waited_total} waited, ` +
    `oracle: ${t.consistent ? "consistent" : "INCONSISTENT"}`;
  $("error").textContent = "";
}

function guarded(fn) {
  try {
    fn();
  } catch (e) {
    $("error").textContent = String(e.message ?? e);
  }
}

function runScenario() {
  guarded(() => show(simulate($("scenario").value, $("policy").value, $("overrides").value)));
}

function runSynthetic() {
  guarded(() =>
    show(
      simulate_synthetic(
        Number($("seed").value),
        Number($("events").value),
        Number($("accounts").value),
        Number($("readers").value),
        $("policy").value,
      ),
    ),
  );
}

function updateRelation() {
  guarded(() => ($("rel-out").textContent = relation($("rel-a").value, $("rel-b").value)));
}

await init();

const builtins = JSON.parse(builtin_scenarios());
for (const name of Object.keys(builtins)) $("builtin").add(new Option(name, name));
$("builtin").value = "sharing-walkthrough";
$("scenario").value = builtins["sharing-walkthrough"];
$("builtin").onchange = () => {
  $("scenario").value = builtins[$("builtin").value];
  runScenario();
};

for (const sel of [$("rel-a"), $("rel-b")]) {
  for (let k = 1; k <= 7; k++) sel.add(new Option(`Resp${k}`, `Resp${k}`));
  sel.onchange = updateRelation;
}
$("rel-b").value = "Resp2";

$("run").onclick = runScenario;
$("policy").onchange = runScenario;
$("synth").onclick = runSynthetic;

runScenario();
updateRelation();
