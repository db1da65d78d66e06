import { ServiceClient } from "./api.js";
import { ConsoleViewModel } from "./console.js";
import { renderGraph, renderHistory, renderTranscript, setStatus } from "./render.js";

const baseUrlInput = document.querySelector<HTMLInputElement>("#base-url")!;
const connectBtn = document.querySelector<HTMLButtonElement>("#connect")!;
const userInput = document.querySelector<HTMLInputElement>("#user")!;
const userLabel = document.querySelector<HTMLElement>("#attribution")!;
const utteranceInput = document.querySelector<HTMLInputElement>("#utterance")!;
const sendBtn = document.querySelector<HTMLButtonElement>("#send")!;
const transcriptDiv = document.querySelector<HTMLElement>("#transcript")!;
const historyDiv = document.querySelector<HTMLElement>("#history")!;
const graphDiv = document.querySelector<HTMLElement>("#graph")!;
const subjectInput = document.querySelector<HTMLInputElement>("#subject")!;
const hopsInput = document.querySelector<HTMLInputElement>("#hops")!;
const exploreBtn = document.querySelector<HTMLButtonElement>("#explore")!;
const statusLine = document.querySelector<HTMLElement>("#status")!;

let vm: ConsoleViewModel | null = null;

function repaint(): void {
  if (!vm) {
    return;
  }
  userLabel.textContent = `acting as ${vm.activeUser}`;
  renderTranscript(transcriptDiv, vm.transcript);
  renderHistory(historyDiv, vm.historyView, (key) => {
    void vm!.rollbackFromHistory(key);
  });
  renderGraph(graphDiv, vm.graphView);
  if (vm.lastRefreshError) {
    setStatus(statusLine, vm.lastRefreshError, true);
  } else {
    setStatus(statusLine, "connected", false);
  }
  transcriptDiv.scrollTop = transcriptDiv.scrollHeight;
}

function connect(): void {
  if (vm) {
    vm.stopPolling();
  }
  vm = new ConsoleViewModel(new ServiceClient(baseUrlInput.value));
  vm.onChange = repaint;
  if (userInput.value.trim()) {
    vm.switchUser(userInput.value);
  }
  vm.startPolling();
  void vm.refresh();
  setStatus(statusLine, "connecting…", false);
}

async function send(): Promise<void> {
  if (!vm) {
    setStatus(statusLine, "connect to a service first", true);
    return;
  }
  const text = utteranceInput.value.trim();
  if (!text) {
    return;
  }
  utteranceInput.value = "";
  await vm.submitUtterance(text);
}

connectBtn.addEventListener("click", connect);
sendBtn.addEventListener("click", () => {
  void send();
});
utteranceInput.addEventListener("keydown", (ev) => {
  if (ev.key === "Enter") {
    void send();
  }
});
userInput.addEventListener("change", () => {
  if (vm) {
    vm.switchUser(userInput.value);
  }
});
exploreBtn.addEventListener("click", () => {
  if (!vm) {
    setStatus(statusLine, "connect to a service first", true);
    return;
  }
  const subject = subjectInput.value.trim();
  if (!subject) {
    return;
  }
  const n = Number.parseInt(hopsInput.value, 10);
  void vm.exploreNeighborhood(subject, Number.isNaN(n) ? 10 : n);
});
