import { api, ApiError } from "./api.js";
import type { SessionState } from "./types.js";
import { samePot, toViewModel, type BoardViewModel } from "./viewmodel.js";

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class App {
  private state: SessionState | null = null;
  private busy = false; // one in-flight mutation at a time
  private message = "";
  private messageKind: "info" | "error" = "info";
  private swapPick: string | null = null; // first team of a swap pair
  private presets: string[] = [];
  private methods: string[] = [];

  constructor(private root: HTMLElement) {
    void this.boot();
  }

  private async boot(): Promise<void> {
    try {
      const data = await api.presets();
      this.presets = data.presets;
      this.methods = data.methods;
    } catch (exc) {
      this.message = `service unreachable: ${String(exc)}`;
      this.messageKind = "error";
    }
    this.render();
  }

  private flash(text: string, kind: "info" | "error" = "info"): void {
    this.message = text;
    this.messageKind = kind;
    this.render();
  }

  private async mutate(run: () => Promise<void>): Promise<void> {
    if (this.busy) return; // click during in-flight request: ignored
    this.busy = true;
    this.render();
    try {
      await run();
      this.message = "";
    } catch (exc) {
      this.message = exc instanceof ApiError ? exc.message : String(exc);
      this.messageKind = "error";
    }
    this.busy = false;
    this.render();
  }

  private start(method: string, preset: string, seedText: string): void {
    const body: { method: string; preset: string; seed?: number } = {
      method,
      preset,
    };
    if (seedText.trim() !== "") body.seed = Number(seedText);
    void this.mutate(async () => {
      this.state = await api.createSession(body);
      this.swapPick = null;
    });
  }

  private step(body: { action: string; index?: number; team_a?: string; team_b?: string }): void {
    const id = this.state?.id;
    if (!id) return;
    void this.mutate(async () => {
      const resp = await api.step(id, body);
      this.state = resp.state;
    });
  }

  private pickTeamForSwap(vm: BoardViewModel, team: string): void {
    if (this.swapPick === null) {
      this.swapPick = team;
      this.flash(`selected ${team}; pick a same-pot partner`);
      return;
    }
    if (this.swapPick === team) {
      this.swapPick = null;
      this.flash("selection cleared");
      return;
    }
    if (!samePot(vm, this.swapPick, team)) {
      this.flash(`${this.swapPick} and ${team} are not in the same pot`, "error");
      return;
    }
    const [a, b] = [this.swapPick, team];
    this.swapPick = null;
    this.step({ action: "propose_pair", team_a: a, team_b: b });
  }

  private verify(): void {
    const id = this.state?.id;
    if (!id) return;
    void this.mutate(async () => {
      const { match } = await api.verify(id);
      this.message = match
        ? "transcript replay matches this draw"
        : "transcript replay DOES NOT match";
      this.messageKind = match ? "info" : "error";
    });
  }

  // -- rendering ---------------------------------------------------------

  private render(): void {
    this.root.replaceChildren(
      this.state === null ? this.renderChooser() : this.renderSession()
    );
  }

  private renderChooser(): HTMLElement {
    const box = el("div", "chooser");
    box.appendChild(el("h1", undefined, "group draw"));
    const form = el("div", "chooser-form");
    const methodSel = document.createElement("select");
    for (const m of this.methods) {
      methodSel.appendChild(new Option(m, m));
    }
    const presetSel = document.createElement("select");
    for (const p of this.presets) {
      presetSel.appendChild(new Option(p, p, p === "wc2022", p === "wc2022"));
    }
    const seedInput = document.createElement("input");
    seedInput.placeholder = "seed (blank = random)";
    seedInput.inputMode = "numeric";
    const startBtn = el("button", "primary", "start draw") as HTMLButtonElement;
    startBtn.disabled = this.busy || this.methods.length === 0;
    startBtn.onclick = () =>
      this.start(methodSel.value, presetSel.value, seedInput.value);
    form.append(methodSel, presetSel, seedInput, startBtn);
    box.appendChild(form);
    box.appendChild(this.renderMessage());
    return box;
  }

  private renderSession(): HTMLElement {
    const state = this.state!;
    const vm = toViewModel(state);
    const box = el("div", "session");

    const head = el("div", "head");
    head.appendChild(el("span", "tag", vm.method));
    head.appendChild(el("span", "tag", `seed ${vm.seed}`));
    if (vm.swapsRemaining !== null) {
      head.appendChild(el("span", "tag", `swaps remaining: ${vm.swapsRemaining}`));
    }
    if (vm.complete) {
      head.appendChild(el("span", vm.valid ? "tag ok" : "tag bad",
        vm.valid ? "complete: valid draw" : "complete: INVALID"));
    }
    const newBtn = el("button", undefined, "new session") as HTMLButtonElement;
    newBtn.onclick = () => {
      this.state = null;
      this.message = "";
      this.render();
    };
    head.appendChild(newBtn);
    box.appendChild(head);

    box.appendChild(this.renderGrid(vm));
    box.appendChild(this.renderControls(vm));
    box.appendChild(this.renderMessage());
    box.appendChild(this.renderHistory(vm));
    return box;
  }

  private renderGrid(vm: BoardViewModel): HTMLElement {
    const table = document.createElement("table");
    table.className = "board";
    const headRow = document.createElement("tr");
    headRow.appendChild(el("th", undefined, "pot"));
    for (const g of vm.groupLabels) {
      const th = el("th", undefined, `Group ${g}`);
      if (vm.pendingSlot && vm.pendingSlot.group === g) th.className = "pending";
      headRow.appendChild(th);
    }
    table.appendChild(headRow);
    const swapMode = vm.swapsRemaining !== null && !vm.complete;
    vm.grid.forEach((row, p) => {
      const tr = document.createElement("tr");
      tr.appendChild(el("th", undefined, String(p + 1)));
      row.forEach((team, gi) => {
        const td = el("td", team === null ? "empty" : "filled", team ?? "—");
        if (
          vm.pendingSlot &&
          vm.pendingSlot.pot === p + 1 &&
          vm.groupLabels[gi] === vm.pendingSlot.group
        ) {
          td.classList.add("pending");
        }
        if (swapMode && team !== null) {
          td.classList.add("swappable");
          if (team === this.swapPick) td.classList.add("selected");
          td.onclick = () => this.pickTeamForSwap(vm, team);
        }
        tr.appendChild(td);
      });
      table.appendChild(tr);
    });
    return table;
  }

  private renderControls(vm: BoardViewModel): HTMLElement {
    const bar = el("div", "controls");
    if (vm.complete) {
      const verifyBtn = el("button", "primary", "verify replay") as HTMLButtonElement;
      verifyBtn.disabled = this.busy;
      verifyBtn.onclick = () => this.verify();
      bar.appendChild(verifyBtn);
      return bar;
    }
    if (vm.swapsRemaining !== null) {
      bar.appendChild(el("span", "hint",
        this.swapPick === null
          ? "click two same-pot teams to propose a swap, or:"
          : `swap partner for ${this.swapPick}?`));
      const randomBtn = el("button", "primary", "random pair") as HTMLButtonElement;
      randomBtn.disabled = this.busy;
      randomBtn.onclick = () => this.step({ action: "auto" });
      bar.appendChild(randomBtn);
      return bar;
    }
    const bowl = el("div", "bowl");
    const slot = vm.pendingSlot;
    bowl.appendChild(el("span", "hint",
      slot && slot.group !== null
        ? `drawing pot ${slot.pot}, group ${slot.group} — ${vm.ballTotal} balls:`
        : `drawing pot ${slot?.pot} — ${vm.ballTotal} balls:`));
    for (const entry of vm.bowl) {
      const cluster = el("span", "cluster");
      cluster.appendChild(el("span", "team", entry.team));
      for (const index of entry.indices) {
        const ball = el("button", "ball", String(index)) as HTMLButtonElement;
        ball.disabled = this.busy;
        ball.onclick = () => this.step({ action: "pick_ball", index });
        cluster.appendChild(ball);
      }
      bowl.appendChild(cluster);
    }
    const autoBtn = el("button", "primary", "auto pick") as HTMLButtonElement;
    autoBtn.disabled = this.busy;
    autoBtn.onclick = () => this.step({ action: "auto" });
    bowl.appendChild(autoBtn);
    bar.appendChild(bowl);
    return bar;
  }

  private renderMessage(): HTMLElement {
    return el("div", `message ${this.messageKind}`, this.message);
  }

  private renderHistory(vm: BoardViewModel): HTMLElement {
    const box = el("div", "history");
    if (vm.history.length) box.appendChild(el("h2", undefined, "history"));
    const list = document.createElement("ol");
    for (const line of vm.history) {
      list.appendChild(el("li", undefined, line));
    }
    box.appendChild(list);
    return box;
  }
}
