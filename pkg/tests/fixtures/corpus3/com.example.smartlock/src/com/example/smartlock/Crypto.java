package com.example.smartlock;

public class Crypto {
    public static byte[] w(String cmd) {
        Cipher cipher = Cipher.getInstance("AES/ECB/PKCS5Padding");
        cipher.init(Cipher.ENCRYPT_MODE, new SecretKeySpec(LockService.KEY, "AES"));
        return cipher.doFinal(fmt(cmd));
    }

    static byte[] fmt(String cmd) {
        return ("CMD:" + cmd).getBytes();
    }
}
