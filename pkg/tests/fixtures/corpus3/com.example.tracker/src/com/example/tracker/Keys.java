package com.example.tracker;

public class Keys {
    static SecretKey session() {
        return new SecretKeySpec(Store.load("k"), "AES");
    }

    static byte[] concat(byte[] a, byte[] b) {
        byte[] out = new byte[a.length + b.length];
        System.arraycopy(a, 0, out, 0, a.length);
        System.arraycopy(b, 0, out, a.length, b.length);
        return out;
    }
}
