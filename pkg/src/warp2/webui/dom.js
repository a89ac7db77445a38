// Bare-hands DOM helpers; no framework, no templates, no innerHTML for data.
export function el(tag, attrs = {}, ...children) {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
        if (typeof value === "function") {
            node.addEventListener(key.replace(/^on/, ""), value);
        }
        else if (typeof value === "boolean") {
            if (value)
                node.setAttribute(key, "");
        }
        else if (key === "class") {
            node.className = value;
        }
        else {
            node.setAttribute(key, value);
        }
    }
    for (const child of children) {
        if (child === null || child === undefined)
            continue;
        node.append(typeof child === "string" ? document.createTextNode(child) : child);
    }
    return node;
}
export function clear(node) {
    while (node.firstChild)
        node.removeChild(node.firstChild);
}
export function replace(node, ...children) {
    clear(node);
    for (const child of children) {
        if (child === null || child === undefined)
            continue;
        node.append(typeof child === "string" ? document.createTextNode(child) : child);
    }
}
